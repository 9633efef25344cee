#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace nial {

// All library failures derive from NialError so callers (and the CLI) can
// print a stable one-line "error: <category>: <message>" and exit nonzero.
class NialError : public std::runtime_error {
 public:
  NialError(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}
  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

#define NIAL_DEFINE_ERROR(Name, cat)                              \
  class Name : public NialError {                                 \
   public:                                                        \
    explicit Name(const std::string& m) : NialError(cat, m) {}    \
  }

NIAL_DEFINE_ERROR(DimensionError, "dimension");    // shape mismatch between operands
NIAL_DEFINE_ERROR(ContractError, "contract");      // API misuse: non-scalar loss, missing grad, ...
NIAL_DEFINE_ERROR(ParseError, "parse");            // malformed CSV or config text
NIAL_DEFINE_ERROR(LabelError, "label");            // out-of-range or non-binary class label
NIAL_DEFINE_ERROR(DatasetError, "dataset");        // empty or unusable dataset
NIAL_DEFINE_ERROR(SplitError, "split");            // stratified split cannot honor a class
NIAL_DEFINE_ERROR(BuildError, "build");            // model config violates a shape invariant
NIAL_DEFINE_ERROR(CheckpointError, "checkpoint");  // corrupt, truncated or inconsistent file
NIAL_DEFINE_ERROR(VersionError, "version");        // checkpoint format version mismatch
NIAL_DEFINE_ERROR(ConfigError, "config");          // bad experiment configuration
NIAL_DEFINE_ERROR(DivergenceError, "divergence");  // NaN/Inf loss during training
NIAL_DEFINE_ERROR(IoError, "io");                  // file system failure with path context

#undef NIAL_DEFINE_ERROR

}  // namespace nial
