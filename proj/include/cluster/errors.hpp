#pragma once

#include <stdexcept>
#include <string>

namespace cluster {

// Error categories map onto process exit codes in the CLI:
// usage -> 2, data -> 3, everything else -> 1.
enum class ErrorKind { Runtime, Usage, Data };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Argument outside the mathematical domain of an operation.
struct DomainError : Error {
  explicit DomainError(const std::string& what) : Error(ErrorKind::Runtime, what) {}
};

// Vector/matrix extents do not agree.
struct DimensionMismatch : DomainError {
  explicit DimensionMismatch(const std::string& what) : DomainError(what) {}
};

// Availability-weighted preference mass is zero for some cluster row.
struct SingularPreference : DomainError {
  explicit SingularPreference(const std::string& what) : DomainError(what) {}
};

// Input sits exactly on a boundary the operation cannot handle.
struct BoundaryValue : DomainError {
  explicit BoundaryValue(const std::string& what) : DomainError(what) {}
};

// All providers unavailable where at least one is required.
struct EmptyActiveSet : DomainError {
  explicit EmptyActiveSet(const std::string& what) : DomainError(what) {}
};

// Too few samples/draws for the requested statistic.
struct InsufficientSamples : DomainError {
  explicit InsufficientSamples(const std::string& what) : DomainError(what) {}
};

// Chains carry no variation; convergence statistics are undefined.
struct DegenerateChains : DomainError {
  explicit DegenerateChains(const std::string& what) : DomainError(what) {}
};

// Clustering input has fewer distinct rows than requested clusters.
struct DegenerateInput : DomainError {
  explicit DegenerateInput(const std::string& what) : DomainError(what) {}
};

// Too few predictive draws for the requested summary.
struct InsufficientDraws : DomainError {
  explicit InsufficientDraws(const std::string& what) : DomainError(what) {}
};

// A weight draw's retained mass cannot reach the truncation threshold.
struct ThresholdUnreachable : DomainError {
  explicit ThresholdUnreachable(const std::string& what) : DomainError(what) {}
};

// Posterior density evaluated non-finite where finiteness is required.
struct NonFiniteDensity : Error {
  explicit NonFiniteDensity(const std::string& what) : Error(ErrorKind::Runtime, what) {}
};

// Malformed configuration or command line.
struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

// Byte-level parse failure in an input file.
struct ParseError : Error {
  explicit ParseError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

// Structurally valid file with the wrong shape (columns, fields, versions).
struct SchemaError : Error {
  explicit SchemaError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

// Data violates a documented dataset invariant.
struct InvariantError : Error {
  explicit InvariantError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

// Artifact format version not supported by this build.
struct VersionError : Error {
  explicit VersionError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

}  // namespace cluster
