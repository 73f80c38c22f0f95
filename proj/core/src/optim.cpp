/*
 * cardioshape
 *
 * Copyright 2026 The cardioshape Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cardioshape/optim.hpp"

#include "cardioshape/error.hpp"

#include <cmath>
#include <string>

namespace cardioshape {

void AdamOptions::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ValidationError("Adam: learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ValidationError("Adam: beta1 must lie in [0,1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ValidationError("Adam: beta2 must lie in [0,1)");
  if (!(epsilon > 0.0)) throw ValidationError("Adam: epsilon must be positive");
}

AdamState::AdamState(AdamOptions options) : options_(options) { options_.validate(); }

void AdamState::reset() {
  m_.resize(0);
  v_.resize(0);
  steps_ = 0;
}

void AdamState::step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grads) {
  if (params.size() != grads.size()) {
    throw ValidationError("Adam: " + std::to_string(grads.size()) + " gradients for " + std::to_string(params.size()) +
                          " parameters");
  }
  if (!grads.allFinite()) throw Error("Adam: non-finite gradient at step " + std::to_string(steps_ + 1));
  if (steps_ == 0) {
    m_ = Eigen::VectorXd::Zero(params.size());
    v_ = Eigen::VectorXd::Zero(params.size());
  } else if (m_.size() != params.size()) {
    throw ValidationError("Adam: parameter count changed between steps");
  }
  ++steps_;
  const auto& o = options_;
  m_ = o.beta1 * m_ + (1.0 - o.beta1) * grads;
  v_ = o.beta2 * v_ + (1.0 - o.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(steps_));
  params.array() -= o.lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + o.epsilon);
}

}  // namespace cardioshape
