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

#include "rwkvunet/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "rwkvunet/autodiff.hpp"
#include "rwkvunet/checkpoint.hpp"
#include "rwkvunet/metrics.hpp"
#include "rwkvunet/random.hpp"

namespace rwkvunet {

double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr_init, double lr_min) {
  if (total_steps <= 0) return lr_init;
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_min + 0.5 * (lr_init - lr_min) * (1.0 + std::cos(std::numbers::pi * frac));
}

AdamW::AdamW(std::vector<NamedTensor> params, Options options) : params_(std::move(params)), options_(options) {
  for (const auto& p : params_) {
    m_.push_back(Tensor::zeros(p.tensor.shape(), p.tensor.dtype()));
    v_.push_back(Tensor::zeros(p.tensor.shape(), p.tensor.dtype()));
  }
}

void AdamW::step(double lr) {
  for (const auto& p : params_) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad().to_vector()) {
      if (!std::isfinite(g)) throw DivergenceError("non-finite gradient in parameter '" + p.name + "'");
    }
  }
  ++step_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double decay = 1.0 - lr * options_.weight_decay;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].tensor;
    if (!p.has_grad()) continue;
    dispatch(p.dtype(), [&]<class T>() {
      auto w = p.mutable_data<T>();
      auto g = p.grad_data<T>();
      auto m = m_[i].mutable_data<T>();
      auto v = v_[i].mutable_data<T>();
      for (std::size_t j = 0; j < w.size(); ++j) {
        const double gj = g[j];
        const double mj = b1 * m[j] + (1 - b1) * gj;
        const double vj = b2 * v[j] + (1 - b2) * gj * gj;
        m[j] = static_cast<T>(mj);
        v[j] = static_cast<T>(vj);
        const double update = (mj / c1) / (std::sqrt(vj / c2) + options_.epsilon);
        w[j] = static_cast<T>(static_cast<double>(w[j]) * decay - lr * update);
      }
    });
  }
}

std::vector<NamedTensor> AdamW::state() const {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.push_back({"optim.m." + params_[i].name, m_[i]});
    out.push_back({"optim.v." + params_[i].name, v_[i]});
  }
  out.push_back({"optim.step", Tensor::scalar(static_cast<double>(step_), DType::kFloat64)});
  return out;
}

void AdamW::load_state(const std::vector<NamedTensor>& tensors) {
  auto find = [&](const std::string& name) -> const Tensor& {
    for (const auto& t : tensors) {
      if (t.name == name) return t.tensor;
    }
    throw CheckpointError(CheckpointError::Kind::kMissingTensor, "checkpoint lacks optimizer tensor '" + name + "'");
  };
  for (std::size_t i = 0; i < params_.size(); ++i) {
    for (auto* slot : {&m_[i], &v_[i]}) {
      const std::string name = (slot == &m_[i] ? "optim.m." : "optim.v.") + params_[i].name;
      const Tensor& t = find(name);
      if (t.shape() != params_[i].tensor.shape()) {
        throw CheckpointError(CheckpointError::Kind::kShapeMismatch, "optimizer tensor '" + name + "' has shape " +
                                                                         shape_str(t.shape()));
      }
      *slot = t.to(params_[i].tensor.dtype());
    }
  }
  step_ = static_cast<std::int64_t>(find("optim.step").item());
}

std::string format_epoch_log(const EpochLog& log) {
  std::ostringstream s;
  s.precision(8);
  s << "epoch=" << log.epoch << " lr=" << log.lr << " loss=" << log.loss << " dsc=" << log.dsc;
  return s.str();
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ValueError("epochs must be >= 1");
  if (batch_size < 1) throw ValueError("batch_size must be >= 1");
  if (!(lr_init > 0) || lr_min < 0 || lr_min > lr_init) throw ValueError("learning rates need 0 <= lr_min <= lr_init");
  if (weight_decay < 0) throw ValueError("weight decay must be nonnegative");
  if (grad_clip < 0) throw ValueError("grad_clip must be nonnegative");
  if (stop_after < 0) throw ValueError("stop_after must be nonnegative");
  loss.validate();
}

namespace {

std::int64_t logit_channels(std::int64_t class_count) { return class_count == 2 ? 1 : class_count; }

// Random flips and quarter turns applied identically to images and masks.
void augment_batch(SegmentationBatch& batch, Rng& rng) {
  const std::int64_t n = batch.images.dim(0), c = batch.images.dim(1), h = batch.images.dim(2),
                     w = batch.images.dim(3);
  dispatch(batch.images.dtype(), [&]<class T>() {
    auto src = batch.images.data<T>();
    std::vector<T> img(src.begin(), src.end());
    for (std::int64_t i = 0; i < n; ++i) {
      const bool flip_y = rng.uniform() < 0.5, flip_x = rng.uniform() < 0.5;
      const bool transpose = h == w && rng.uniform() < 0.5;
      auto map = [&](std::int64_t y, std::int64_t x) {
        if (transpose) std::swap(y, x);
        if (flip_y) y = h - 1 - y;
        if (flip_x) x = w - 1 - x;
        return y * w + x;
      };
      std::vector<T> plane(static_cast<std::size_t>(h * w));
      for (std::int64_t ch = 0; ch < c; ++ch) {
        T* p = img.data() + (i * c + ch) * h * w;
        for (std::int64_t y = 0; y < h; ++y)
          for (std::int64_t x = 0; x < w; ++x) plane[static_cast<std::size_t>(y * w + x)] = p[map(y, x)];
        std::copy(plane.begin(), plane.end(), p);
      }
      std::vector<std::int32_t> labels(static_cast<std::size_t>(h * w));
      std::int32_t* lp = batch.masks.labels.data() + i * h * w;
      for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) labels[static_cast<std::size_t>(y * w + x)] = lp[map(y, x)];
      std::copy(labels.begin(), labels.end(), lp);
    }
    batch.images = Tensor::from_vector(batch.images.shape(), std::move(img));
  });
}

void clip_gradients(std::vector<NamedTensor>& params, double threshold) {
  double total = 0;
  for (auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad().to_vector()) total += g * g;
  }
  const double norm = std::sqrt(total);
  if (!(norm > threshold)) return;
  const double scale = threshold / norm;
  for (auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    std::visit([&](auto& v) {
      for (auto& g : v) g = static_cast<std::decay_t<decltype(g)>>(g * scale);
    }, *p.tensor.impl().grad);
  }
}

struct RunState {
  int epoch = 0;  // completed epochs
  double best_dsc = -1;
  int best_epoch = 0;
};

NamedTensor state_tensor(const RunState& s) {
  return {"train.state", Tensor::from_vector({3}, std::vector<double>{static_cast<double>(s.epoch), s.best_dsc,
                                                                      static_cast<double>(s.best_epoch)})};
}

void write_summary(const TrainConfig& cfg, const TrainResult& r, double final_dsc, const std::string& status) {
  if (cfg.checkpoint_dir.empty()) return;
  std::ofstream f(std::filesystem::path(cfg.checkpoint_dir) / "summary.txt", std::ios::trunc);
  f.precision(10);
  f << "status=" << status << '\n'
    << "variant=" << variant_name(cfg.variant) << '\n'
    << "epochs=" << cfg.epochs << '\n'
    << "completed_epochs=" << r.completed_epochs << '\n'
    << "batch_size=" << cfg.batch_size << '\n'
    << "lr_init=" << cfg.lr_init << '\n'
    << "lr_min=" << cfg.lr_min << '\n'
    << "weight_decay=" << cfg.weight_decay << '\n'
    << "alpha=" << cfg.loss.alpha << '\n'
    << "beta=" << cfg.loss.beta << '\n'
    << "seed=" << cfg.seed << '\n'
    << "augment=" << (cfg.augment ? 1 : 0) << '\n';
  if (!r.history.empty()) {
    f << "final_loss=" << r.history.back().loss << '\n' << "final_epoch_dsc=" << r.history.back().dsc << '\n';
  }
  if (final_dsc >= 0) f << "final_train_dsc=" << final_dsc << '\n';
  f << "best_dsc=" << r.best_dsc << '\n' << "best_epoch=" << r.best_epoch << '\n';
}

TrainResult run(const TrainConfig& cfg, const Dataset& data, SegmentationModel model, AdamW& opt, RunState state,
                std::ostream* log, const Dataset* validation) {
  TrainResult result{std::move(model), {}, std::max(0.0, state.best_dsc), state.best_epoch, state.epoch};
  auto params = result.model.parameters();
  const std::filesystem::path dir(cfg.checkpoint_dir);
  if (!cfg.checkpoint_dir.empty()) std::filesystem::create_directories(dir);
  const std::size_t n = data.samples.size();

  for (int epoch = state.epoch + 1; epoch <= cfg.epochs; ++epoch) {
    EpochLog entry;
    entry.epoch = epoch;
    entry.lr = cosine_lr(epoch - 1, cfg.epochs, cfg.lr_init, cfg.lr_min);

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng shuffle(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.uniform_int(i))]);
    Rng aug(mix_seed(cfg.seed ^ 0x9e3779b97f4a7c15ull, static_cast<std::uint64_t>(epoch)));

    double loss_sum = 0;
    std::vector<LabelMap> preds, truths;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      SegmentationBatch batch = make_batch(data, {order.begin() + static_cast<std::ptrdiff_t>(start),
                                                  order.begin() + static_cast<std::ptrdiff_t>(end)});
      if (cfg.augment) augment_batch(batch, aug);
      for (auto& p : params) p.tensor.clear_grad();
      Tape tape;
      Tensor logits, loss;
      try {
        logits = result.model.forward(batch.images);
        loss = mixed_loss(logits, batch.masks, cfg.loss);
      } catch (const NonFiniteError& e) {
        write_summary(cfg, result, -1, "diverged");
        throw DivergenceError("activations became non-finite at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      const double value = loss.item();
      if (!std::isfinite(value)) {
        write_summary(cfg, result, -1, "diverged");
        throw DivergenceError("training loss became non-finite at epoch " + std::to_string(epoch));
      }
      tape.backward(loss);
      if (cfg.grad_clip > 0) clip_gradients(params, cfg.grad_clip);
      try {
        opt.step(entry.lr);
      } catch (const DivergenceError&) {
        write_summary(cfg, result, -1, "diverged");
        throw;
      }
      loss_sum += value * static_cast<double>(end - start);
      preds.push_back(predict_labels(logits));
      truths.push_back(batch.masks);
    }
    entry.loss = loss_sum / static_cast<double>(n);
    entry.dsc = validation ? evaluate_dsc(result.model, *validation, cfg.batch_size)
                           : dsc(stack_labels(preds), stack_labels(truths), data.class_count).mean_foreground;
    result.history.push_back(entry);
    result.completed_epochs = epoch;
    if (log) *log << format_epoch_log(entry) << std::endl;

    state.epoch = epoch;
    const bool improved = entry.dsc > state.best_dsc;
    if (improved) {
      state.best_dsc = entry.dsc;
      state.best_epoch = epoch;
    }
    result.best_dsc = state.best_dsc;
    result.best_epoch = state.best_epoch;
    if (!cfg.checkpoint_dir.empty()) {
      std::vector<NamedTensor> extra = opt.state();
      extra.push_back(state_tensor(state));
      save_checkpoint(result.model, (dir / "last.ckpt").string(), extra);
      if (improved) save_checkpoint(result.model, (dir / "best.ckpt").string(), extra);
    }
    if (cfg.stop_after > 0 && epoch >= cfg.stop_after) break;
  }
  const bool finished = result.completed_epochs >= cfg.epochs;
  write_summary(cfg, result, evaluate_dsc(result.model, data, cfg.batch_size), finished ? "completed" : "stopped");
  return result;
}

void check_dataset(const Dataset& data) {
  if (data.samples.empty()) throw ValueError("training dataset is empty");
  if (data.class_count < 2) throw ValueError("dataset needs at least two classes (background included)");
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const Dataset& data, std::ostream* log, const Dataset* validation) {
  cfg.validate();
  check_dataset(data);
  const auto model_cfg = ModelConfig::make(cfg.variant, data.channels(), logit_channels(data.class_count));
  SegmentationModel model = build_model(model_cfg, cfg.seed, cfg.dtype);
  AdamW opt(model.parameters(), {0.9, 0.999, 1e-8, cfg.weight_decay});
  return run(cfg, data, std::move(model), opt, RunState{}, log, validation);
}

TrainResult resume(const TrainConfig& cfg, const Dataset& data, const std::string& checkpoint_path,
                   std::ostream* log, const Dataset* validation) {
  cfg.validate();
  check_dataset(data);
  const auto tensors = read_tensors(checkpoint_path);
  const ModelConfig model_cfg = config_from_tensors(tensors);
  if (model_cfg.variant != cfg.variant || model_cfg.in_channels != data.channels() ||
      model_cfg.num_classes != logit_channels(data.class_count)) {
    throw CheckpointError(CheckpointError::Kind::kShapeMismatch,
                          "checkpoint architecture does not match the training configuration");
  }
  SegmentationModel model = build_model(model_cfg, cfg.seed, cfg.dtype);
  assign_parameters(model, tensors);
  AdamW opt(model.parameters(), {0.9, 0.999, 1e-8, cfg.weight_decay});
  opt.load_state(tensors);
  RunState state;
  bool found = false;
  for (const auto& t : tensors) {
    if (t.name != "train.state") continue;
    const auto v = t.tensor.to_vector();
    if (v.size() != 3) break;
    state.epoch = static_cast<int>(v[0]);
    state.best_dsc = v[1];
    state.best_epoch = static_cast<int>(v[2]);
    found = true;
  }
  if (!found) throw CheckpointError(CheckpointError::Kind::kMissingTensor, "checkpoint has no training state");
  return run(cfg, data, std::move(model), opt, state, log, validation);
}

double evaluate_dsc(const SegmentationModel& model, const Dataset& data, int batch_size) {
  if (data.samples.empty()) throw ValueError("evaluation dataset is empty");
  NoGradGuard guard;
  double total = 0;
  const std::size_t n = data.samples.size();
  const auto step = static_cast<std::size_t>(std::max(1, batch_size));
  for (std::size_t start = 0; start < n; start += step) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(n, start + step); ++i) idx.push_back(i);
    const SegmentationBatch batch = make_batch(data, idx);
    const LabelMap pred = predict_labels(model.forward(batch.images));
    for (std::int64_t i = 0; i < pred.batch; ++i) {
      total += dsc(pred.item(i), batch.masks.item(i), data.class_count).mean_foreground;
    }
  }
  return total / static_cast<double>(n);
}

}  // namespace rwkvunet
