#pragma once

#include <stdexcept>
#include <string>

namespace rrtk {

// Bad user input or malformed data: CLI exit code 2.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what)
      : std::runtime_error(what) {}
};

// A pipeline run failed (divergence, NaN energy, ...): CLI exit code 3.
struct PipelineError : std::runtime_error {
  explicit PipelineError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace rrtk
