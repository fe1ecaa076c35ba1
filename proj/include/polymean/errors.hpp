#pragma once

#include <stdexcept>
#include <string>

namespace polymean {

// Base class of all domain errors. `kind()` is the stable machine-readable
// tag that the CLI emits in its error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define POLYMEAN_DEFINE_ERROR(NAME)                                  \
  class NAME : public Error {                                        \
   public:                                                           \
    explicit NAME(const std::string& m) : Error(#NAME, m) {}         \
  }

POLYMEAN_DEFINE_ERROR(TypeError);             // mismatched space/point kinds
POLYMEAN_DEFINE_ERROR(DimensionError);        // size/shape mismatch
POLYMEAN_DEFINE_ERROR(NonUniqueGeodesicError);
POLYMEAN_DEFINE_ERROR(CutLocusError);
POLYMEAN_DEFINE_ERROR(UnsupportedOperationError);
POLYMEAN_DEFINE_ERROR(ConfigError);
POLYMEAN_DEFINE_ERROR(MassError);             // weight vectors do not sum up
POLYMEAN_DEFINE_ERROR(ExperimentAbortError);
POLYMEAN_DEFINE_ERROR(IoError);

#undef POLYMEAN_DEFINE_ERROR

}  // namespace polymean
