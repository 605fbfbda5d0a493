#pragma once

#include <filesystem>
#include <iosfwd>

#include "bier/ensemble.hpp"

namespace bier {

// Model section of a checkpoint:
//   "BIERMDL1", u32 h, u32 d, u32 M, u32 sizes[M], f64 W[h*d] (row-major),
//   u8 backbone flag, then if set: u32 input_dim, f64 weights[h*input_dim]
//   (row-major), f64 bias[h]. All integers and floats little-endian.
void write_model(std::ostream& os, const EnsembleModel& model);
// Throws FormatError (with byte offset) on malformed input.
EnsembleModel read_model(std::istream& is);

void save_model(const std::filesystem::path& path, const EnsembleModel& model);
// Reads only the model section; any trailing training state is ignored.
EnsembleModel load_model(const std::filesystem::path& path);

}  // namespace bier
