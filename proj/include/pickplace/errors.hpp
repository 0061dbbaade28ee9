#pragma once

#include <stdexcept>
#include <string>

namespace pickplace {

// Base for all recoverable engine errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct InvalidBand : Error {
    explicit InvalidBand(const std::string& what) : Error(what) {}
};

struct InvalidDepth : Error {
    explicit InvalidDepth(const std::string& what) : Error(what) {}
};

struct EmptyDepthImage : Error {
    explicit EmptyDepthImage(const std::string& what) : Error(what) {}
};

struct NoSurface : Error {
    explicit NoSurface(const std::string& what) : Error(what) {}
};

struct NoInterior : Error {
    explicit NoInterior(const std::string& what) : Error(what) {}
};

struct EmptyMapSet : Error {
    explicit EmptyMapSet(const std::string& what) : Error(what) {}
};

struct ShapeMismatch : Error {
    explicit ShapeMismatch(const std::string& what) : Error(what) {}
};

struct EmptyMask : Error {
    explicit EmptyMask(const std::string& what) : Error(what) {}
};

struct NoGraspFound : Error {
    explicit NoGraspFound(const std::string& what) : Error(what) {}
};

struct SpawnBudgetExceeded : Error {
    explicit SpawnBudgetExceeded(const std::string& what) : Error(what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error(what) {}
};

}  // namespace pickplace
