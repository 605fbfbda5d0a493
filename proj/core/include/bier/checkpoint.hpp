#pragma once

#include <filesystem>
#include <iosfwd>

#include "bier/diversity.hpp"
#include "bier/trainer.hpp"

namespace bier {

// A checkpoint is the model section (see model_io.hpp) followed by
//   "BIERTRN1", u64 iteration, u8 bank flag [+ bank], optimizer state,
//   RNG engine state as a length-prefixed string.
// Inference tools read just the model section.
void write_checkpoint(std::ostream& os, const TrainState& state);
TrainState read_checkpoint(std::istream& is);
void save_checkpoint(const std::filesystem::path& path, const TrainState& state);
TrainState load_checkpoint(const std::filesystem::path& path);

void write_bank(std::ostream& os, const RegressorBank& bank);
RegressorBank read_bank(std::istream& is);

}  // namespace bier
