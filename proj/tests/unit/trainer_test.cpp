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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "rwkvunet/autodiff.hpp"
#include "rwkvunet/checkpoint.hpp"

namespace rwkvunet {
namespace {

namespace fs = std::filesystem;

TEST(CosineLr, EndpointsAndMidpoint) {
  EXPECT_DOUBLE_EQ(cosine_lr(0, 100, 1e-3, 1e-5), 1e-3);
  EXPECT_NEAR(cosine_lr(50, 100, 1e-3, 1e-5), (1e-3 + 1e-5) / 2, 1e-18);
  EXPECT_NEAR(cosine_lr(100, 100, 1e-3, 1e-5), 1e-5, 1e-18);
  for (int s = 0; s < 100; ++s) {
    const double expect = 1e-5 + 0.5 * (1e-3 - 1e-5) * (1 + std::cos(std::numbers::pi * s / 100));
    EXPECT_NEAR(cosine_lr(s, 100, 1e-3, 1e-5), expect, 1e-18);
    EXPECT_GE(cosine_lr(s, 100, 1e-3, 1e-5), cosine_lr(s + 1, 100, 1e-3, 1e-5));
  }
}

TEST(AdamW, MatchesReferenceUpdates) {
  Tensor w = Tensor::from_vector({3}, std::vector<double>{0.5, -1.0, 2.0});
  AdamW opt({{"w", w}}, {0.9, 0.999, 1e-8, 0.1});
  std::vector<double> ref{0.5, -1.0, 2.0}, m(3, 0), v(3, 0);
  const std::vector<std::vector<double>> grads{{0.1, -0.2, 0.0}, {0.3, 0.1, -0.5}, {-0.2, 0.0, 0.4}};
  for (std::size_t t = 0; t < grads.size(); ++t) {
    w.zero_grad();
    auto& g = std::get<std::vector<double>>(detail::grad_buffer(w));
    g = grads[t];
    const double lr = 0.01;
    opt.step(lr);
    for (int j = 0; j < 3; ++j) {
      m[j] = 0.9 * m[j] + 0.1 * grads[t][j];
      v[j] = 0.999 * v[j] + 0.001 * grads[t][j] * grads[t][j];
      const double mh = m[j] / (1 - std::pow(0.9, t + 1)), vh = v[j] / (1 - std::pow(0.999, t + 1));
      ref[j] = ref[j] - lr * 0.1 * ref[j] - lr * mh / (std::sqrt(vh) + 1e-8);
    }
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(w.value_at(j), ref[j], 1e-15);
  }
  EXPECT_EQ(opt.step_count(), 3);
}

TEST(AdamW, ZeroGradientWithoutDecayIsNoOp) {
  Tensor w = Tensor::from_vector({2}, std::vector<float>{1.5f, -3.0f});
  const Tensor before = w.detach();
  AdamW opt({{"w", w}}, {0.9, 0.999, 1e-8, 0.0});
  w.zero_grad();
  opt.step(0.1);
  EXPECT_TRUE(bitwise_equal(w, before));
}

TEST(AdamW, NonFiniteGradientThrowsBeforeUpdating) {
  Tensor a = Tensor::from_vector({1}, std::vector<double>{1.0});
  Tensor b = Tensor::from_vector({1}, std::vector<double>{2.0});
  AdamW opt({{"a", a}, {"b", b}}, {});
  a.zero_grad();
  std::get<std::vector<double>>(detail::grad_buffer(a))[0] = 1.0;
  b.zero_grad();
  std::get<std::vector<double>>(detail::grad_buffer(b))[0] = std::nan("");
  try {
    opt.step(0.1);
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos);
  }
  EXPECT_EQ(a.value_at(0), 1.0);
  EXPECT_EQ(opt.step_count(), 0);
}

TEST(AdamW, StateRoundTrip) {
  Tensor w = Tensor::from_vector({2}, std::vector<double>{1, 2});
  AdamW opt({{"w", w}}, {});
  w.zero_grad();
  std::get<std::vector<double>>(detail::grad_buffer(w)) = {0.5, -0.5};
  opt.step(0.01);
  AdamW copy({{"w", w}}, {});
  copy.load_state(opt.state());
  EXPECT_EQ(copy.step_count(), 1);
  EXPECT_THROW(copy.load_state({}), CheckpointError);
}

TEST(EpochLog, Format) {
  EXPECT_EQ(format_epoch_log({3, 0.001, 0.25, 0.875}), "epoch=3 lr=0.001 loss=0.25 dsc=0.875");
}

Dataset tiny_dataset(const std::string& dir, int count, int classes) {
  SyntheticSpec spec;
  spec.count = count;
  spec.resolution = 64;
  spec.class_count = classes;
  spec.seed = 21;
  return load_dataset(generate_synthetic(spec, dir), 32, classes);
}

class TrainerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("rwkvunet_train_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    data_ = tiny_dataset((dir_ / "data").string(), 3, 3);
  }
  void TearDown() override { fs::remove_all(dir_); }

  TrainConfig config(const std::string& out) const {
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 2;
    cfg.seed = 4;
    cfg.augment = true;
    cfg.checkpoint_dir = out.empty() ? "" : (dir_ / out).string();
    return cfg;
  }

  static void expect_same_params(SegmentationModel& a, SegmentationModel& b) {
    const auto pa = a.parameters(), pb = b.parameters();
    ASSERT_EQ(pa.size(), pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_TRUE(bitwise_equal(pa[i].tensor, pb[i].tensor)) << pa[i].name;
  }

  fs::path dir_;
  Dataset data_;
};

TEST_F(TrainerTest, SameSeedIsBitwiseReproducible) {
  std::ostringstream la, lb;
  auto a = train(config(""), data_, &la);
  auto b = train(config(""), data_, &lb);
  expect_same_params(a.model, b.model);
  EXPECT_EQ(la.str(), lb.str());
  ASSERT_EQ(a.history.size(), 3u);
  EXPECT_EQ(a.completed_epochs, 3);
  for (const auto& h : a.history) EXPECT_TRUE(std::isfinite(h.loss));
  auto other = config("");
  other.seed = 5;
  auto c = train(other, data_);
  EXPECT_FALSE(bitwise_equal(c.model.parameters()[0].tensor, a.model.parameters()[0].tensor));
}

TEST_F(TrainerTest, ResumeMatchesUninterruptedRun) {
  auto full = train(config("full"), data_);
  auto cfg = config("part");
  cfg.stop_after = 2;
  auto part = train(cfg, data_);
  EXPECT_EQ(part.completed_epochs, 2);
  cfg.stop_after = 0;
  auto resumed = resume(cfg, data_, (dir_ / "part" / "last.ckpt").string());
  EXPECT_EQ(resumed.completed_epochs, 3);
  expect_same_params(full.model, resumed.model);
  EXPECT_EQ(resumed.history.back().loss, full.history.back().loss);

  auto wrong = cfg;
  wrong.variant = Variant::kSmall;
  EXPECT_THROW(resume(wrong, data_, (dir_ / "part" / "last.ckpt").string()), CheckpointError);
}

TEST_F(TrainerTest, WritesCheckpointsAndSummary) {
  auto r = train(config("run"), data_);
  EXPECT_TRUE(fs::exists(dir_ / "run" / "last.ckpt"));
  EXPECT_TRUE(fs::exists(dir_ / "run" / "best.ckpt"));
  std::ifstream f(dir_ / "run" / "summary.txt");
  std::map<std::string, std::string> kv;
  for (std::string line; std::getline(f, line);) {
    const auto eq = line.find('=');
    ASSERT_NE(eq, std::string::npos) << line;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  EXPECT_EQ(kv["status"], "completed");
  EXPECT_EQ(kv["variant"], "tiny");
  EXPECT_EQ(kv["completed_epochs"], "3");
  EXPECT_EQ(std::stoi(kv["best_epoch"]), r.best_epoch);
  auto best = load_checkpoint((dir_ / "run" / "best.ckpt").string());
  EXPECT_EQ(best.config.num_classes, 3);
}

TEST_F(TrainerTest, DivergenceIsReported) {
  auto cfg = config("div");
  cfg.lr_init = 1e30;
  cfg.epochs = 5;
  EXPECT_THROW(train(cfg, data_), DivergenceError);
  std::ifstream f(dir_ / "div" / "summary.txt");
  std::string first;
  std::getline(f, first);
  EXPECT_EQ(first, "status=diverged");
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  cfg.lr_min = 1.0;
  EXPECT_THROW(cfg.validate(), ValueError);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ValueError);
}

}  // namespace
}  // namespace rwkvunet
