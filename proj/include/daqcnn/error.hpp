#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace daqcnn {

enum class errc {
  angle_out_of_range,
  size_error,
  shape_mismatch,
  invalid_steps,
  too_many_qubits,
  index_out_of_range,
  non_finite,
  unknown_graph_name,
  invalid_edge,
  step_too_large,
  patch_too_large,
  dimension_mismatch,
  io_error,
  shape_error,
  non_finite_activation,
  empty_split,
  single_class,
  empty_input,
  bad_magic,
  truncated_file,
  count_mismatch,
  missing_file,
  non_grayscale,
  bad_label,
  config_error,
};

constexpr std::string_view to_string(errc code) noexcept {
  switch (code) {
    case errc::angle_out_of_range: return "AngleOutOfRange";
    case errc::size_error: return "SizeError";
    case errc::shape_mismatch: return "ShapeMismatch";
    case errc::invalid_steps: return "InvalidSteps";
    case errc::too_many_qubits: return "TooManyQubits";
    case errc::index_out_of_range: return "IndexOutOfRange";
    case errc::non_finite: return "NonFinite";
    case errc::unknown_graph_name: return "UnknownGraphName";
    case errc::invalid_edge: return "InvalidEdge";
    case errc::step_too_large: return "StepTooLarge";
    case errc::patch_too_large: return "PatchTooLarge";
    case errc::dimension_mismatch: return "DimensionMismatch";
    case errc::io_error: return "IoError";
    case errc::shape_error: return "ShapeError";
    case errc::non_finite_activation: return "NonFiniteActivation";
    case errc::empty_split: return "EmptySplit";
    case errc::single_class: return "SingleClassError";
    case errc::empty_input: return "EmptyInput";
    case errc::bad_magic: return "BadMagic";
    case errc::truncated_file: return "TruncatedFile";
    case errc::count_mismatch: return "CountMismatch";
    case errc::missing_file: return "MissingFile";
    case errc::non_grayscale: return "NonGrayscale";
    case errc::bad_label: return "BadLabel";
    case errc::config_error: return "ConfigError";
  }
  return "Unknown";
}

/// Single exception type for the library; `code()` identifies the failure class.
class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

}  // namespace daqcnn
