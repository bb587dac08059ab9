// Copyright 2026 The ACAM Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Central finite-difference check of tape gradients.

#ifndef ACAM_GRADCHECK_H_
#define ACAM_GRADCHECK_H_

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "acam/tape.h"

namespace acam::diff {

struct GradCheckOptions {
  double step = 1e-4;
  double rel_tol = 1e-3;
  // Differences below this are accepted regardless of relative error.
  double abs_tol = 1e-6;
  // Step used instead, relative to `step`, for entries whose window holds a
  // kink (forward and backward one-sided slopes disagree).
  double kink_step_factor = 1e-2;
};

struct TensorCheck {
  std::string name;
  std::size_t entries = 0;
  std::size_t failures = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t kinks = 0;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;
  std::size_t failing_tensors() const;
  std::string summary() const;
};

// Builds the scalar loss on the tape it is given.
using LossBuilder = std::function<Var(Tape&)>;

// Compares backward() against (f(x+h) - f(x-h)) / 2h for every entry of
// every parameter in `params` (restored afterwards). Entries straddling a
// kink are compared at the smaller step instead.
GradCheckReport check_gradients(ParamStore& params, const LossBuilder& loss,
                                const GradCheckOptions& options = {});

bool within_tolerance(double analytic, double numeric,
                      const GradCheckOptions& options);

}  // namespace acam::diff

#endif  // ACAM_GRADCHECK_H_
