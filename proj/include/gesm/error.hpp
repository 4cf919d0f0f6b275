#pragma once

#include <stdexcept>
#include <string>

namespace gesm {

/// Base class for every error raised by this library.
class GesmError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Incompatible shapes or non-square input where a square matrix is required.
class DimensionError : public GesmError {
public:
    using GesmError::GesmError;
};

/// Argument outside its documented domain (bad index, bad probability, empty mask, ...).
class ValueError : public GesmError {
public:
    using GesmError::GesmError;
};

/// A column with no mass cannot be turned into a transition distribution.
class NormalizationError : public GesmError {
public:
    using GesmError::GesmError;
};

/// Malformed container header (magic, version, flags).
class FormatError : public GesmError {
public:
    using GesmError::GesmError;
};

/// Container sections shorter or longer than the header promises.
class SizeError : public GesmError {
public:
    using GesmError::GesmError;
};

/// Non-finite value where a finite one is required (diverged step, bad gradient).
class NumericError : public GesmError {
public:
    using GesmError::GesmError;
};

/// Filesystem-level failure (cannot open, short write).
class IoError : public GesmError {
public:
    using GesmError::GesmError;
};

} // namespace gesm
