#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "msp/core/rng.hpp"
#include "msp/model/checkpoint.hpp"
#include "msp/model/model.hpp"

using namespace msp;
using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {

ModelConfig desk_config(int num_ids = 4, int num_clothes = 6) {
  ModelConfig c;
  c.backbone = Backbone::kTinyCnn;
  c.input_height = 64;
  c.input_width = 32;
  c.embed_dim = 128;
  c.num_identities = num_ids;
  c.num_clothes_classes = num_clothes;
  return c;
}

std::vector<Image> random_batch(int n, int h, int w, uint64_t seed) {
  RngStream rng(seed);
  std::vector<Image> images;
  for (int i = 0; i < n; ++i) {
    Image img(h, w);
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          img.at(c, y, x) = static_cast<float>(rng.uniform());
        }
      }
    }
    images.push_back(std::move(img));
  }
  return images;
}

std::vector<const Image*> pointers(const std::vector<Image>& images) {
  std::vector<const Image*> p;
  for (const Image& img : images) p.push_back(&img);
  return p;
}

}  // namespace

TEST_CASE("model config validation") {
  ModelConfig c = desk_config();
  c.validate();
  CHECK(c.feature_height() == 4);
  CHECK(c.feature_width() == 2);
  CHECK(c.id_channels() == 64);

  ModelConfig bad = desk_config();
  bad.input_height = 60;  // not divisible by the total stride
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = desk_config();
  bad.embed_dim = 127;  // pooled halves must split evenly
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = desk_config();
  bad.num_identities = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("forward produces the documented shapes") {
  ReidModel model(desk_config(), 1);
  std::vector<Image> batch = random_batch(3, 64, 32, 10);
  Tape tape;
  ModelOutputs out =
      model.forward(tape, pointers(batch), ForwardMode::kTrain, false);
  CHECK(tape.val(out.backbone_features).shape() ==
        std::vector<int>{3, 64, 4, 2});
  CHECK(tape.val(out.id_features).shape() == std::vector<int>{3, 64, 4, 2});
  CHECK(tape.val(out.attention_logits).shape() ==
        std::vector<int>{3, 1, 4, 2});
  CHECK(tape.val(out.attention_map).shape() == std::vector<int>{3, 1, 4, 2});
  CHECK(tape.val(out.gated_features).shape() == std::vector<int>{3, 64, 4, 2});
  CHECK(tape.val(out.embedding_pre_bn).shape() == std::vector<int>{3, 128});
  CHECK(tape.val(out.embedding_post_bn).shape() == std::vector<int>{3, 128});
  CHECK(tape.val(out.id_logits).shape() == std::vector<int>{3, 4});
  CHECK(tape.val(out.clothes_logits_head).shape() == std::vector<int>{3, 6});
  CHECK(tape.val(out.clothes_logits_adv).shape() == std::vector<int>{3, 6});
}

TEST_CASE("attention map is a per-sample distribution") {
  ReidModel model(desk_config(), 2);
  std::vector<Image> batch = random_batch(4, 64, 32, 20);
  Tape tape;
  ModelOutputs out =
      model.forward(tape, pointers(batch), ForwardMode::kTrain, false);
  const Tensor& a = tape.val(out.attention_map);
  for (int n = 0; n < 4; ++n) {
    double sum = 0;
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 2; ++x) {
        CHECK(a.at4(n, 0, y, x) > 0.0);
        sum += a.at4(n, 0, y, x);
      }
    }
    CHECK(std::abs(sum - 1.0) <= 1e-6);
  }
}

TEST_CASE("gating multiplies id features by the attention map in train mode") {
  ReidModel model(desk_config(), 3);
  std::vector<Image> batch = random_batch(2, 64, 32, 30);
  Tape tape;
  ModelOutputs out =
      model.forward(tape, pointers(batch), ForwardMode::kTrain, false);
  const Tensor& f = tape.val(out.id_features);
  const Tensor& a = tape.val(out.attention_map);
  const Tensor& g = tape.val(out.gated_features);
  for (int n = 0; n < 2; ++n) {
    for (int c = 0; c < 64; ++c) {
      for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 2; ++x) {
          CHECK(g.at4(n, c, y, x) ==
                doctest::Approx(f.at4(n, c, y, x) * a.at4(n, 0, y, x))
                    .epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("eval mode and disabled gating bypass the attention gate") {
  ModelConfig config = desk_config();
  SUBCASE("eval mode") {}
  SUBCASE("rpa disabled") { config.rpa_enabled = false; }
  ReidModel model(config, 4);
  std::vector<Image> batch = random_batch(2, 64, 32, 40);
  Tape tape;
  const ForwardMode mode =
      config.rpa_enabled ? ForwardMode::kEval : ForwardMode::kTrain;
  ModelOutputs out = model.forward(tape, pointers(batch), mode, false);
  const Tensor& f = tape.val(out.id_features);
  const Tensor& g = tape.val(out.gated_features);
  for (int64_t i = 0; i < f.numel(); ++i) CHECK(g[i] == f[i]);
}

TEST_CASE("embedding is max pooling beside mean pooling of gated features") {
  ReidModel model(desk_config(), 5);
  std::vector<Image> batch = random_batch(2, 64, 32, 50);
  Tape tape;
  ModelOutputs out =
      model.forward(tape, pointers(batch), ForwardMode::kTrain, false);
  const Tensor& g = tape.val(out.gated_features);
  const Tensor& e = tape.val(out.embedding_pre_bn);
  for (int n = 0; n < 2; ++n) {
    for (int c = 0; c < 64; ++c) {
      double mx = -1e300;
      double av = 0;
      for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 2; ++x) {
          mx = std::max(mx, g.at4(n, c, y, x));
          av += g.at4(n, c, y, x);
        }
      }
      av /= 8;
      CHECK(e.at2(n, c) == doctest::Approx(mx).epsilon(1e-12));
      CHECK(e.at2(n, c + 64) == doctest::Approx(av).epsilon(1e-12));
    }
  }
}

TEST_CASE("parameter init is seed-deterministic") {
  ReidModel a(desk_config(), 99);
  ReidModel b(desk_config(), 99);
  ReidModel c(desk_config(), 100);
  bool any_differ = false;
  for (const auto& [name, tensor] : a.params()) {
    const Tensor& tb = b.params().at(name);
    const Tensor& tc = c.params().at(name);
    for (int64_t i = 0; i < tensor.numel(); ++i) {
      CHECK(tensor[i] == tb[i]);
      if (tensor[i] != tc[i]) any_differ = true;
    }
  }
  CHECK(any_differ);
}

TEST_CASE("attention starts near uniform thanks to the small head init") {
  ReidModel model(desk_config(), 6);
  std::vector<Image> batch = random_batch(2, 64, 32, 60);
  Tape tape;
  ModelOutputs out =
      model.forward(tape, pointers(batch), ForwardMode::kTrain, false);
  const Tensor& a = tape.val(out.attention_map);
  const double uniform = 1.0 / 8.0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    CHECK(a[i] == doctest::Approx(uniform).epsilon(0.2));
  }
}

TEST_CASE("train mode converges its running stats, then eval agrees") {
  ModelConfig config = desk_config();
  config.rpa_enabled = false;  // gate off so train and eval pool identically
  ReidModel model(config, 7);
  std::vector<Image> batch = random_batch(4, 64, 32, 70);

  // Repeatedly folding the same batch statistics drives the running
  // estimates to exactly those statistics.
  for (int i = 0; i < 200; ++i) {
    Tape tape;
    model.forward(tape, pointers(batch), ForwardMode::kTrain, true);
  }
  Tape t1;
  ModelOutputs train_out =
      model.forward(t1, pointers(batch), ForwardMode::kTrain, false);
  Tape t2;
  ModelOutputs eval_out =
      model.forward(t2, pointers(batch), ForwardMode::kEval, false);
  const Tensor& a = t1.val(train_out.embedding_pre_bn);
  const Tensor& b = t2.val(eval_out.embedding_pre_bn);
  for (int64_t i = 0; i < a.numel(); ++i) {
    CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-5));
  }
}

TEST_CASE("clothes head logits agree between the two gradient paths") {
  ReidModel model(desk_config(), 8);
  std::vector<Image> batch = random_batch(2, 64, 32, 80);
  Tape tape;
  ModelOutputs out =
      model.forward(tape, pointers(batch), ForwardMode::kTrain, false);
  const Tensor& head = tape.val(out.clothes_logits_head);
  const Tensor& adv = tape.val(out.clothes_logits_adv);
  for (int64_t i = 0; i < head.numel(); ++i) {
    CHECK(head[i] == doctest::Approx(adv[i]).epsilon(1e-12));
  }
}

TEST_CASE("identical batches produce identical outputs across forwards") {
  ReidModel model(desk_config(), 9);
  std::vector<Image> batch = random_batch(3, 64, 32, 90);
  Tape t1;
  Tape t2;
  ModelOutputs o1 =
      model.forward(t1, pointers(batch), ForwardMode::kTrain, false);
  ModelOutputs o2 =
      model.forward(t2, pointers(batch), ForwardMode::kTrain, false);
  const Tensor& a = t1.val(o1.embedding_post_bn);
  const Tensor& b = t2.val(o2.embedding_post_bn);
  for (int64_t i = 0; i < a.numel(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("checkpoints round-trip parameters, bn stats and optimizer state") {
  namespace fs = std::filesystem;
  const std::string path =
      (fs::temp_directory_path() / "msp_test_ckpt.bin").string();

  ModelConfig config = desk_config();
  ReidModel model(config, 11);
  // Make running stats non-trivial first.
  std::vector<Image> batch = random_batch(2, 64, 32, 110);
  for (int i = 0; i < 3; ++i) {
    Tape tape;
    model.forward(tape, pointers(batch), ForwardMode::kTrain, true);
  }
  nn::Adam adam(1e-3, 1e-4);
  std::map<std::string, Tensor> grads;
  for (const auto& [name, p] : model.params()) {
    Tensor g(p.shape());
    RngStream rng(hash_str(name));
    for (int64_t i = 0; i < g.numel(); ++i) g[i] = rng.uniform_in(-0.1, 0.1);
    grads.emplace(name, g);
  }
  adam.step(model.params(), grads);

  save_checkpoint(path, model, &adam, CheckpointMeta{12345, 7});

  ReidModel restored(config, 999);  // different init, will be overwritten
  nn::Adam restored_adam(1e-3, 1e-4);
  CheckpointMeta meta = load_checkpoint(path, restored, &restored_adam, 12345);
  CHECK(meta.epoch == 7);
  CHECK(meta.config_hash == 12345);
  for (const auto& [name, p] : model.params()) {
    const Tensor& q = restored.params().at(name);
    for (int64_t i = 0; i < p.numel(); ++i) CHECK(p[i] == q[i]);
  }
  for (auto& [name, state] : model.bn_states()) {
    const nn::BatchNormState& r = restored.bn_states().at(name);
    CHECK(state.batches_seen == r.batches_seen);
    for (int64_t i = 0; i < state.running_mean.numel(); ++i) {
      CHECK(state.running_mean[i] == r.running_mean[i]);
      CHECK(state.running_var[i] == r.running_var[i]);
    }
  }
  CHECK(adam.steps_taken() == restored_adam.steps_taken());
  for (auto& [name, m] : adam.first_moments()) {
    const Tensor& rm = restored_adam.first_moments().at(name);
    for (int64_t i = 0; i < m.numel(); ++i) CHECK(m[i] == rm[i]);
  }

  // Same weights must reproduce the same embeddings.
  Tape t1;
  Tape t2;
  ModelOutputs o1 =
      model.forward(t1, pointers(batch), ForwardMode::kEval, false);
  ModelOutputs o2 =
      restored.forward(t2, pointers(batch), ForwardMode::kEval, false);
  const Tensor& e1 = t1.val(o1.embedding_post_bn);
  const Tensor& e2 = t2.val(o2.embedding_post_bn);
  for (int64_t i = 0; i < e1.numel(); ++i) CHECK(e1[i] == e2[i]);

  std::remove(path.c_str());
}

TEST_CASE("checkpoint loading rejects a mismatched config hash") {
  namespace fs = std::filesystem;
  const std::string path =
      (fs::temp_directory_path() / "msp_test_ckpt_hash.bin").string();
  ReidModel model(desk_config(), 12);
  save_checkpoint(path, model, nullptr, CheckpointMeta{111, 1});
  ReidModel other(desk_config(), 13);
  CHECK_THROWS_AS(load_checkpoint(path, other, nullptr, 222), ConfigError);
  // Hash 0 means "don't check".
  CheckpointMeta meta = load_checkpoint(path, other, nullptr, 0);
  CHECK(meta.config_hash == 111);
  std::remove(path.c_str());
}

TEST_CASE("a truncated checkpoint is reported as corrupt") {
  namespace fs = std::filesystem;
  const std::string path =
      (fs::temp_directory_path() / "msp_test_ckpt_trunc.bin").string();
  ReidModel model(desk_config(), 14);
  save_checkpoint(path, model, nullptr, CheckpointMeta{5, 2});
  const auto full_size = fs::file_size(path);
  fs::resize_file(path, full_size / 2);
  ReidModel other(desk_config(), 15);
  CHECK_THROWS_AS(load_checkpoint(path, other, nullptr, 5), DataError);
  std::remove(path.c_str());
}

TEST_CASE("resnet-50 backbone forwards at reduced input size") {
  ModelConfig config;
  config.backbone = Backbone::kResnet50;
  config.input_height = 64;
  config.input_width = 32;
  config.embed_dim = 128;
  config.num_identities = 3;
  config.num_clothes_classes = 4;
  config.validate();
  ReidModel model(config, 16);
  std::vector<Image> batch = random_batch(1, 64, 32, 160);
  Tape tape;
  ModelOutputs out =
      model.forward(tape, pointers(batch), ForwardMode::kTrain, false);
  // Last stage keeps stride 1, so the grid matches the tiny backbone's.
  CHECK(tape.val(out.backbone_features).shape() ==
        std::vector<int>{1, 2048, 4, 2});
  CHECK(tape.val(out.embedding_pre_bn).shape() == std::vector<int>{1, 128});
  CHECK(tape.val(out.id_logits).shape() == std::vector<int>{1, 3});
  double sum = 0;
  const Tensor& a = tape.val(out.attention_map);
  for (int64_t i = 0; i < a.numel(); ++i) {
    REQUIRE(std::isfinite(a[i]));
    sum += a[i];
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  const Tensor& e = tape.val(out.embedding_post_bn);
  for (int64_t i = 0; i < e.numel(); ++i) REQUIRE(std::isfinite(e[i]));
}

TEST_CASE("backbone names round-trip") {
  CHECK(backbone_from_string(to_string(Backbone::kTinyCnn)) ==
        Backbone::kTinyCnn);
  CHECK(backbone_from_string(to_string(Backbone::kResnet50)) ==
        Backbone::kResnet50);
  CHECK_THROWS_AS(backbone_from_string("vgg"), Error);
}
