#pragma once

#include <stdexcept>
#include <string>

namespace tce {

// Zero or near-zero vector where a direction is required.
struct DegenerateVectorError : std::domain_error {
  explicit DegenerateVectorError(const std::string& what) : std::domain_error(what) {}
};

// Difference of two consecutive embeddings collapsed to (near) zero.
struct DegenerateSegmentError : std::domain_error {
  explicit DegenerateSegmentError(const std::string& what) : std::domain_error(what) {}
};

// Fewer negative candidates available than requested.
struct InsufficientNegativesError : std::runtime_error {
  explicit InsufficientNegativesError(const std::string& what) : std::runtime_error(what) {}
};

// Lookup of a key that is not present in a memory bank.
struct KeyError : std::runtime_error {
  explicit KeyError(const std::string& what) : std::runtime_error(what) {}
};

// Anything wrong while reading a dataset from disk.
struct LoadError : std::runtime_error {
  explicit LoadError(const std::string& what) : std::runtime_error(what) {}
};

// Dataset content unusable for the requested operation (e.g. empty class).
struct DatasetError : std::runtime_error {
  explicit DatasetError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid run configuration detected at startup.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Checkpoint file problems, split by cause so callers can distinguish them.
struct CheckpointError : std::runtime_error {
  explicit CheckpointError(const std::string& what) : std::runtime_error(what) {}
};
struct VersionError : CheckpointError {
  explicit VersionError(const std::string& what) : CheckpointError(what) {}
};
struct ChecksumError : CheckpointError {
  explicit ChecksumError(const std::string& what) : CheckpointError(what) {}
};

}  // namespace tce
