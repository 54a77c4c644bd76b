#pragma once

#include <string>
#include <vector>

#include "romilab/core/types.h"

namespace romilab::eval {

// Corridor fixture for the forward-vs-reverse augmentation argument. The
// dataset walks s_in -> goal; both augmentations visit the same imagined
// states s_1..s_5 off the dataset, the forward one as a chain starting at
// s_in, the reverse one as predecessors leading back into s_in.
struct AppendixArm {
  bool chain_to_s5 = false;  // forward-time transition chain from s_in reaches s_5
  bool visits_s5 = false;    // greedy execution from s_in passes through s_5
  bool success = false;      // greedy execution from s_in reaches the goal without collision
  int first_action = -1;     // greedy action at s_in
  std::vector<State> path;
};

struct AppendixCase {
  int id = 0;
  std::string description;
  AppendixArm forward;
  AppendixArm reverse;
  bool pass = false;
};

struct AppendixAReport {
  std::vector<AppendixCase> cases;
  bool pass = false;
  std::string to_text() const;
};

// Case 1: s_5 outside the dataset with an inflated value. Case 2: s_5
// outside the dataset, not overestimated. Case 3: s_5 inside the dataset
// with its own path to the goal.
AppendixAReport appendix_a_scenario();

}  // namespace romilab::eval
