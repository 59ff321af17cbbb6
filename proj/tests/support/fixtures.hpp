#pragma once

#include <cstdint>

#include "srla/dataset.hpp"
#include "srla/iohmm.hpp"
#include "srla/synthetic.hpp"

// Shared hand-built models and datasets for the test binaries.
namespace fixture {

// 2 states, 1 input, 1-d observations; all probabilities chosen by hand.
srla::IohmmParams two_state();

// 3-state forward chain under 2 inputs (input 1 degrades faster), 2-d
// observations with well separated means.
srla::IohmmParams three_state_two_input();

// Two units (T = 3 and T = 4), one sensor, one op setting, no input symbols.
// Unit 1's sensor column is {2, 4, 6}.
srla::RunToFailureDataset tiny_dataset();

// Left-to-right chain whose forward probability rises near the end of life,
// matching the demo generator in the command-line tool.
srla::SyntheticConfig chain_config(int n_states, int n_inputs, int n_units, int d_y = 3,
                                   double separation = 1.0, double noise_var = 0.0625);

srla::RunToFailureDataset chain_dataset(int n_states, int n_inputs, int n_units, std::uint64_t seed);

// The generator's ground-truth parameters as a decoder model (emissions are
// shared across inputs, matching how the data was produced).
srla::IohmmParams params_from(const srla::SyntheticConfig& config);

}  // namespace fixture
