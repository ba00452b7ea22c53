#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace derits {

enum class ErrorKind {
  kInvalidInput,          // non-finite or otherwise malformed numeric input
  kInconsistentSpectrum,  // DC/Nyquist realness violated
  kShape,
  kCorruptedMask,
  kParse,
  kFormat,
  kInsufficientData,
  kConfig,
  kIo,
  kNonFinite,             // non-finite gradient reached the optimizer
  kCompatibility,         // checkpoint does not match the data it is applied to
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Single exception type for the library; callers dispatch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace derits
