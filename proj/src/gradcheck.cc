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

#include "acam/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace acam::diff {

bool within_tolerance(double analytic, double numeric,
                      const GradCheckOptions& options) {
  const double diff = std::abs(analytic - numeric);
  if (diff <= options.abs_tol) return true;
  return diff <= options.rel_tol * std::max(std::abs(analytic), std::abs(numeric));
}

std::size_t GradCheckReport::failing_tensors() const {
  return static_cast<std::size_t>(std::count_if(
      tensors.begin(), tensors.end(),
      [](const TensorCheck& t) { return t.failures > 0; }));
}

std::string GradCheckReport::summary() const {
  std::ostringstream out;
  for (const auto& t : tensors) {
    out << (t.failures ? "FAIL " : "ok   ") << t.name << ": " << t.entries
        << " entries, max rel err " << t.max_rel_error << ", max abs err "
        << t.max_abs_error;
    if (t.kinks) out << ", " << t.kinks << " re-checked at a kink";
    out << "\n";
  }
  const std::size_t failing = failing_tensors();
  out << (failing ? "FAIL: " : "PASS: ") << failing << " failing tensors\n";
  return out.str();
}

GradCheckReport check_gradients(ParamStore& params, const LossBuilder& loss,
                                const GradCheckOptions& options) {
  auto evaluate = [&]() {
    Tape tape(params);
    return loss(tape).value()[0];
  };
  Gradients analytic;
  {
    Tape tape(params);
    analytic = tape.backward(loss(tape));
  }
  GradCheckReport report;
  for (ParamId id = 0; id < params.size(); ++id) {
    TensorCheck check;
    check.name = params.name(id);
    Tensor& value = params.value(id);
    check.entries = value.size();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + options.step;
      const double plus = evaluate();
      value[i] = saved - options.step;
      const double minus = evaluate();
      value[i] = saved;
      double numeric = (plus - minus) / (2.0 * options.step);
      const double a = analytic[id][i];
      if (!within_tolerance(a, numeric, options)) {
        // One-sided slopes that disagree mean a relu/clamp kink lies inside
        // the window; the central difference is meaningless there.
        const double center = evaluate();
        const double forward = (plus - center) / options.step;
        const double backward = (center - minus) / options.step;
        if (!within_tolerance(forward, backward, options)) {
          const double h = options.step * options.kink_step_factor;
          value[i] = saved + h;
          const double p2 = evaluate();
          value[i] = saved - h;
          const double m2 = evaluate();
          value[i] = saved;
          numeric = (p2 - m2) / (2.0 * h);
          ++check.kinks;
        }
      }
      const double abs_err = std::abs(a - numeric);
      const double scale = std::max(std::abs(a), std::abs(numeric));
      check.max_abs_error = std::max(check.max_abs_error, abs_err);
      if (scale > 0.0) {
        check.max_rel_error = std::max(check.max_rel_error, abs_err / scale);
      }
      if (!within_tolerance(a, numeric, options)) ++check.failures;
    }
    report.tensors.push_back(check);
  }
  return report;
}

}  // namespace acam::diff
