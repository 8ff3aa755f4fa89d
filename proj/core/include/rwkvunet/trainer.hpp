// Copyright 2026 The RWKV-UNet Authors
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

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rwkvunet/data_io.hpp"
#include "rwkvunet/losses.hpp"
#include "rwkvunet/model.hpp"

namespace rwkvunet {

/// lr_min + (lr_init - lr_min) * (1 + cos(pi * step / total_steps)) / 2.
double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr_init, double lr_min);

/// Decoupled-weight-decay Adam over a fixed list of parameters.
class AdamW {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;
  };

  AdamW(std::vector<NamedTensor> params, Options options);

  /// Applies one update from the parameters' current gradients. A non-finite
  /// gradient throws before anything is modified, naming the parameter.
  void step(double lr);
  std::int64_t step_count() const { return step_; }
  const Options& options() const { return options_; }

  /// Moment buffers as named tensors (optim.m.<name>, optim.v.<name>) plus the step counter.
  std::vector<NamedTensor> state() const;
  void load_state(const std::vector<NamedTensor>& tensors);

 private:
  std::vector<NamedTensor> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  Options options_;
  std::int64_t step_ = 0;
};

/// Raised when the training loss stops being finite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

struct EpochLog {
  int epoch = 0;  // 1-based
  double lr = 0;
  double loss = 0;
  double dsc = 0;
};

std::string format_epoch_log(const EpochLog& log);

struct TrainConfig {
  Variant variant = Variant::kTiny;
  int epochs = 10;
  int batch_size = 2;
  double lr_init = 1e-3;
  double lr_min = 0.0;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;
  LossConfig loss;
  double grad_clip = 0.0;  // global-norm threshold, 0 disables
  bool augment = false;    // random flips and quarter turns
  std::string checkpoint_dir;
  int stop_after = 0;  // end early after this epoch (0 runs to completion)
  DType dtype = DType::kFloat32;

  void validate() const;
};

struct TrainResult {
  SegmentationModel model;
  std::vector<EpochLog> history;
  double best_dsc = 0;
  int best_epoch = 0;
  int completed_epochs = 0;
};

/// Runs training; `log` receives one formatted line per epoch.
TrainResult train(const TrainConfig& cfg, const Dataset& data, std::ostream* log = nullptr,
                  const Dataset* validation = nullptr);
/// Continues a run from a checkpoint written by train().
TrainResult resume(const TrainConfig& cfg, const Dataset& data, const std::string& checkpoint_path,
                   std::ostream* log = nullptr, const Dataset* validation = nullptr);

/// Mean foreground DSC of the model's predictions on a dataset.
double evaluate_dsc(const SegmentationModel& model, const Dataset& data, int batch_size = 2);

}  // namespace rwkvunet
