#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "msp/core/rng.hpp"
#include "msp/losses/losses.hpp"
#include "msp/model/model.hpp"

using namespace msp;
using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {

SoftGrid random_soft(int h, int w, RngStream& rng, double density = 0.5) {
  SoftGrid g(h, w, 0.0f);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (rng.bernoulli(density)) {
        g.at(y, x) = static_cast<float>(rng.uniform());
      }
    }
  }
  return g;
}

/// Per-sample attention rows drawn positive and normalized to 1.
Tensor random_attention(int n, int h, int w, RngStream& rng) {
  Tensor a(std::vector<int>{n, 1, h, w});
  for (int i = 0; i < n; ++i) {
    double sum = 0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double v = 0.05 + rng.uniform();
        a.at4(i, 0, y, x) = v;
        sum += v;
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) a.at4(i, 0, y, x) /= sum;
    }
  }
  return a;
}

/// Plain-loop reference for the attention loss, independent of the tape ops.
double reference_attention_loss(const Tensor& a,
                                const std::vector<AttentionTarget>& targets,
                                const LossWeights& w) {
  const int n = a.dim(0), h = a.dim(2), wd = a.dim(3);
  double total = 0;
  for (int i = 0; i < n; ++i) {
    const AttentionTarget& t = targets[static_cast<size_t>(i)];
    if (t.absent) continue;
    double ce = 0, hair_mass = 0, hair_hit = 0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < wd; ++x) {
        ce -= t.t_plus.at(y, x) * std::log(a.at4(i, 0, y, x));
        hair_mass += t.hair_ds.at(y, x);
        hair_hit += a.at4(i, 0, y, x) * t.hair_ds.at(y, x);
      }
    }
    total += ce + w.lambda_neg * hair_hit / (hair_mass + w.epsilon);
  }
  return total / n;
}

double softmax_ce_row(const Tensor& logits, int row, int target) {
  const int k = logits.dim(1);
  double mx = -1e300;
  for (int j = 0; j < k; ++j) mx = std::max(mx, logits.at2(row, j));
  double z = 0;
  for (int j = 0; j < k; ++j) z += std::exp(logits.at2(row, j) - mx);
  return -(logits.at2(row, target) - mx - std::log(z));
}

Tensor random_logits(int n, int k, uint64_t seed) {
  RngStream rng(seed);
  Tensor t(std::vector<int>{n, k});
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform_in(-2.0, 2.0);
  return t;
}

}  // namespace

TEST_CASE("loss weights validation") {
  LossWeights w;
  w.validate();
  w.lambda_cal = -0.1;
  CHECK_THROWS_AS(w.validate(), ConfigError);
  w = LossWeights{};
  w.epsilon = 0.0;
  CHECK_THROWS_AS(w.validate(), ConfigError);
}

TEST_CASE("attention target normalizes face plus limbs") {
  SoftGrid face(2, 2, 0.0f), limbs(2, 2, 0.0f), hair(2, 2, 0.0f);
  face.at(0, 0) = 1.0f;
  limbs.at(0, 1) = 0.5f;
  hair.at(1, 0) = 1.0f;
  const double eps = 1e-6;
  AttentionTarget t = attention_target(face, limbs, hair, eps);
  CHECK_FALSE(t.absent);
  // The target grid stores floats, so compare at float precision.
  CHECK(t.t_plus.at(0, 0) == doctest::Approx(1.0 / (1.5 + eps)).epsilon(1e-6));
  CHECK(t.t_plus.at(0, 1) == doctest::Approx(0.5 / (1.5 + eps)).epsilon(1e-6));
  CHECK(t.t_plus.at(1, 0) == 0.0f);
  CHECK(t.t_plus.at(1, 1) == 0.0f);
  CHECK(t.hair_ds.at(1, 0) == 1.0f);

  SoftGrid zero(2, 2, 0.0f);
  AttentionTarget absent = attention_target(zero, zero, hair, eps);
  CHECK(absent.absent);
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 2; ++x) CHECK(absent.t_plus.at(y, x) == 0.0f);
  }

  SoftGrid bad(3, 2, 0.0f);
  CHECK_THROWS_AS(attention_target(bad, limbs, hair, eps), ArgumentError);
}

TEST_CASE("attention loss matches a hand-computed uniform-map example") {
  // Uniform 2x2 attention; positive mass on two cells, hair on one.
  Tensor a(std::vector<int>{1, 1, 2, 2});
  for (int64_t i = 0; i < 4; ++i) a[i] = 0.25;

  SoftGrid face(2, 2, 0.0f), limbs(2, 2, 0.0f), hair(2, 2, 0.0f);
  face.at(0, 0) = 1.0f;
  limbs.at(0, 1) = 1.0f;
  hair.at(1, 0) = 1.0f;
  LossWeights w;
  std::vector<AttentionTarget> targets = {
      attention_target(face, limbs, hair, w.epsilon)};

  Tape tape;
  Var av = tape.leaf(a);
  Var loss = attention_loss(tape, av, targets, w);

  // Cross-entropy: both target cells sit on probability 1/4, target mass is
  // 2/(2+eps); penalty: attention 1/4 on the single hair cell, normalized by
  // 1/(1+eps). Targets pass through a float grid, hence float tolerance.
  const double expected =
      -(2.0 / (2.0 + w.epsilon)) * std::log(0.25) +
      w.lambda_neg * 0.25 / (1.0 + w.epsilon);
  CHECK(tape.val(loss)[0] == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("absent targets contribute exactly zero but stay in the mean") {
  RngStream rng(41);
  Tensor a = random_attention(2, 3, 2, rng);
  SoftGrid face = random_soft(3, 2, rng, 0.8);
  SoftGrid limbs = random_soft(3, 2, rng, 0.8);
  SoftGrid hair = random_soft(3, 2, rng, 0.8);
  SoftGrid zero(3, 2, 0.0f);
  LossWeights w;

  std::vector<AttentionTarget> both = {
      attention_target(face, limbs, hair, w.epsilon),
      attention_target(zero, zero, hair, w.epsilon)};
  REQUIRE(both[1].absent);

  Tape tape;
  Var loss2 = attention_loss(tape, tape.leaf(a), both, w);

  // Same present sample alone, batch of one.
  Tensor a1(std::vector<int>{1, 1, 3, 2});
  for (int64_t i = 0; i < 6; ++i) a1[i] = a[i];
  std::vector<AttentionTarget> one = {both[0]};
  Var loss1 = attention_loss(tape, tape.leaf(a1), one, w);

  CHECK(tape.val(loss2)[0] ==
        doctest::Approx(tape.val(loss1)[0] / 2.0).epsilon(1e-12));
}

TEST_CASE("attention loss equals the plain-loop reference on random inputs") {
  RngStream rng(42);
  LossWeights w;
  w.lambda_neg = 0.7;
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(3));
    const int h = 2 + static_cast<int>(rng.uniform_int(3));
    const int wd = 2 + static_cast<int>(rng.uniform_int(3));
    Tensor a = random_attention(n, h, wd, rng);
    std::vector<AttentionTarget> targets;
    for (int i = 0; i < n; ++i) {
      if (rng.bernoulli(0.2)) {
        SoftGrid zero(h, wd, 0.0f);
        targets.push_back(
            attention_target(zero, zero, random_soft(h, wd, rng), w.epsilon));
      } else {
        targets.push_back(attention_target(random_soft(h, wd, rng),
                                           random_soft(h, wd, rng),
                                           random_soft(h, wd, rng),
                                           w.epsilon));
      }
    }
    const double expected = reference_attention_loss(a, targets, w);
    Tape tape;
    Var loss = attention_loss(tape, tape.leaf(a), targets, w);
    CHECK(tape.val(loss)[0] == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("attention loss argument validation") {
  LossWeights w;
  Tape tape;
  Var bad_shape = tape.leaf(Tensor(std::vector<int>{2, 3}));
  CHECK_THROWS_AS(attention_loss(tape, bad_shape, {}, w), ArgumentError);

  RngStream rng(43);
  Var a = tape.leaf(random_attention(2, 2, 2, rng));
  std::vector<AttentionTarget> one_target = {attention_target(
      random_soft(2, 2, rng), random_soft(2, 2, rng), random_soft(2, 2, rng),
      w.epsilon)};
  CHECK_THROWS_AS(attention_loss(tape, a, one_target, w), ArgumentError);

  std::vector<AttentionTarget> wrong_res = {
      attention_target(random_soft(3, 3, rng), random_soft(3, 3, rng),
                       random_soft(3, 3, rng), w.epsilon),
      attention_target(random_soft(3, 3, rng), random_soft(3, 3, rng),
                       random_soft(3, 3, rng), w.epsilon)};
  CHECK_THROWS_AS(attention_loss(tape, a, wrong_res, w), ArgumentError);
}

TEST_CASE("identity loss is mean softmax cross-entropy") {
  Tensor logits = random_logits(3, 5, 50);
  const std::vector<int> labels = {4, 0, 2};
  double expected = 0;
  for (int i = 0; i < 3; ++i) {
    expected += softmax_ce_row(logits, i, labels[static_cast<size_t>(i)]);
  }
  expected /= 3;
  Tape tape;
  Var loss = id_loss(tape, tape.leaf(logits), labels);
  CHECK(tape.val(loss)[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("triplet loss hand example and margin validation") {
  // Two identities, 1-D embeddings 0, 1, 10, 12: hardest positives are the
  // in-pair distances, hardest negatives the cross-pair gaps.
  Tensor e(std::vector<int>{4, 1});
  e[0] = 0, e[1] = 1, e[2] = 10, e[3] = 12;
  const std::vector<int> ids = {7, 7, 9, 9};
  Tape tape;
  Var loss = triplet_loss(tape, tape.leaf(e), ids, 0.3);
  // Anchor hinges: max(0, 0.3 + d_pos - d_neg) per anchor:
  //   a=0: 0.3+1-9; a=1: 0.3+1-9; a=2: 0.3+2-9; a=3: 0.3+2-11  -> all 0.
  CHECK(tape.val(loss)[0] == doctest::Approx(0.0).epsilon(1e-12));

  Tensor tight(std::vector<int>{4, 1});
  tight[0] = 0, tight[1] = 4, tight[2] = 5, tight[3] = 9;
  Var loss2 = triplet_loss(tape, tape.leaf(tight), ids, 0.3);
  // Anchor hinges with embeddings 0,4 | 5,9: a=0: 0.3+4-5 -> 0;
  // a=1: 0.3+4-1 = 3.3; a=2: 0.3+4-1 = 3.3; a=3: 0.3+4-5 -> 0.
  CHECK(tape.val(loss2)[0] == doctest::Approx(6.6 / 4).epsilon(1e-12));

  CHECK_THROWS_AS(triplet_loss(tape, tape.leaf(e), ids, -0.1), ArgumentError);
}

TEST_CASE("cal loss builds uniform targets over the identity's other "
          "clothes") {
  // Identity 0 owns classes {0,1,2}; identity 1 owns {3}.
  const std::map<int, std::vector<int>> clothes_map = {{0, {0, 1, 2}},
                                                       {1, {3}}};
  Tensor head = random_logits(2, 4, 60);
  Tensor adv = random_logits(2, 4, 61);
  const std::vector<int> clothes = {0, 3};
  const std::vector<int> ids = {0, 1};

  Tape tape;
  CalLoss cal = cal_loss(tape, tape.leaf(head), tape.leaf(adv), clothes, ids,
                         clothes_map);

  double expected_cls =
      (softmax_ce_row(head, 0, 0) + softmax_ce_row(head, 1, 3)) / 2;
  CHECK(tape.val(cal.classifier_term)[0] ==
        doctest::Approx(expected_cls).epsilon(1e-12));

  // Row 0: uniform 1/2 over classes 1 and 2. Row 1 has no other classes and
  // contributes zero while staying in the denominator.
  double expected_adv =
      (0.5 * softmax_ce_row(adv, 0, 1) + 0.5 * softmax_ce_row(adv, 0, 2)) / 2;
  CHECK(tape.val(cal.adversarial_term)[0] ==
        doctest::Approx(expected_adv).epsilon(1e-12));
}

TEST_CASE("cal loss argument validation") {
  const std::map<int, std::vector<int>> clothes_map = {{0, {0, 1}}};
  Tensor head = random_logits(1, 2, 70);
  Tensor adv = random_logits(1, 2, 71);
  Tape tape;

  CHECK_THROWS_AS(cal_loss(tape, tape.leaf(head), tape.leaf(adv), {0}, {5},
                           clothes_map),
                  ArgumentError);  // identity missing from the map
  CHECK_THROWS_AS(cal_loss(tape, tape.leaf(head), tape.leaf(adv), {7}, {0},
                           clothes_map),
                  ArgumentError);  // sample's class not listed
  const std::map<int, std::vector<int>> oob = {{0, {0, 9}}};
  CHECK_THROWS_AS(
      cal_loss(tape, tape.leaf(head), tape.leaf(adv), {0}, {0}, oob),
      ArgumentError);  // listed class out of logit range
  Var bad = tape.leaf(Tensor(std::vector<int>{2}));
  CHECK_THROWS_AS(cal_loss(tape, bad, bad, {0, 0}, {0, 0}, clothes_map),
                  ArgumentError);
  CHECK_THROWS_AS(cal_loss(tape, tape.leaf(head), tape.leaf(adv), {0, 0}, {0},
                           clothes_map),
                  ArgumentError);  // label count mismatch
}

TEST_CASE("total loss applies the published weighting") {
  Tape tape;
  auto scalar = [&](double v) {
    Tensor t(std::vector<int>{});
    t[0] = v;
    return tape.leaf(t);
  };
  LossWeights w;
  w.lambda_tri = 0.7;
  w.lambda_att = 1.3;
  w.lambda_cal = 0.4;
  Var total = total_loss(tape, scalar(1.1), scalar(0.5), scalar(0.25),
                         scalar(2.0), w);
  CHECK(tape.val(total)[0] ==
        doctest::Approx(1.1 + 0.7 * 0.5 + 1.3 * 0.25 + 0.4 * 2.0)
            .epsilon(1e-12));

  // Gradient fans out with the weights.
  Var l_id = scalar(1.0), l_tri = scalar(1.0), l_att = scalar(1.0),
      l_cal = scalar(1.0);
  Var t2 = total_loss(tape, l_id, l_tri, l_att, l_cal, w);
  tape.backward(t2);
  CHECK(tape.grad(l_id)[0] == doctest::Approx(1.0));
  CHECK(tape.grad(l_tri)[0] == doctest::Approx(0.7));
  CHECK(tape.grad(l_att)[0] == doctest::Approx(1.3));
  CHECK(tape.grad(l_cal)[0] == doctest::Approx(0.4));

  Var nan_term = scalar(std::nan(""));
  CHECK_THROWS_WITH_AS(
      total_loss(tape, scalar(1.0), nan_term, scalar(1.0), scalar(1.0), w),
      doctest::Contains("triplet"), NumericError);
  Var vec = tape.leaf(Tensor(std::vector<int>{3}));
  CHECK_THROWS_AS(total_loss(tape, vec, scalar(1.0), scalar(1.0), scalar(1.0),
                             w),
                  ArgumentError);
}

TEST_CASE("attention mass sums the two diagnostic inner products") {
  RngStream rng(80);
  SoftGrid a = random_soft(4, 3, rng, 1.0);
  SoftGrid face = random_soft(4, 3, rng);
  SoftGrid limbs = random_soft(4, 3, rng);
  SoftGrid hair = random_soft(4, 3, rng);
  AttentionMass mass = attention_mass(a, face, limbs, hair);
  double hair_ref = 0, pos_ref = 0;
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 3; ++x) {
      hair_ref += static_cast<double>(a.at(y, x)) * hair.at(y, x);
      pos_ref += static_cast<double>(a.at(y, x)) *
                 (static_cast<double>(face.at(y, x)) + limbs.at(y, x));
    }
  }
  CHECK(mass.hair == doctest::Approx(hair_ref).epsilon(1e-12));
  CHECK(mass.positive == doctest::Approx(pos_ref).epsilon(1e-12));

  SoftGrid bad(2, 2, 0.0f);
  CHECK_THROWS_AS(attention_mass(bad, face, limbs, hair), ArgumentError);
}

// ---------------------------------------------------------------------------
// Finite-difference checks of the loss gradients through the tiny network,
// batch of 2 identities x 2 images. Coordinates are sampled per parameter;
// the clothes-branch parameters are excluded from the adversarial and total
// losses (their gradients are deliberately stopped there: the adversarial
// path reads frozen copies) and checked against the classifier term instead.
// ---------------------------------------------------------------------------

namespace {

struct FdRig {
  ModelConfig config;
  ReidModel model;
  std::vector<Image> images;
  std::vector<const Image*> ptrs;
  std::vector<int> ids = {0, 0, 1, 1};
  std::vector<int> clothes = {0, 1, 2, 3};
  std::map<int, std::vector<int>> clothes_map = {{0, {0, 1}}, {1, {2, 3}}};
  std::vector<AttentionTarget> targets;
  LossWeights weights;

  static ModelConfig make_config() {
    ModelConfig c;
    c.backbone = Backbone::kTinyCnn;
    c.input_height = 64;
    c.input_width = 32;
    c.embed_dim = 128;
    c.num_identities = 2;
    c.num_clothes_classes = 4;
    return c;
  }

  FdRig() : config(make_config()), model(config, 21) {
    RngStream rng(900);
    for (int i = 0; i < 4; ++i) {
      Image img(64, 32);
      for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < 64; ++y) {
          for (int x = 0; x < 32; ++x) {
            img.at(c, y, x) = static_cast<float>(rng.uniform());
          }
        }
      }
      images.push_back(std::move(img));
    }
    for (const Image& img : images) ptrs.push_back(&img);
    const int fh = config.feature_height(), fw = config.feature_width();
    for (int i = 0; i < 4; ++i) {
      targets.push_back(attention_target(random_soft(fh, fw, rng),
                                         random_soft(fh, fw, rng),
                                         random_soft(fh, fw, rng),
                                         weights.epsilon));
    }
  }

  /// kind: 0=L_att, 1=L_tri, 2=L_cal(adversarial), 3=L_total, 4=classifier.
  double loss_value(int kind, ModelOutputs* out_keep = nullptr,
                    Tape* tape_keep = nullptr) {
    Tape local;
    Tape& tape = tape_keep ? *tape_keep : local;
    ModelOutputs out =
        model.forward(tape, ptrs, ForwardMode::kTrain, false);
    Var loss;
    switch (kind) {
      case 0:
        loss = attention_loss(tape, out.attention_map, targets, weights);
        break;
      case 1:
        loss = triplet_loss(tape, out.embedding_pre_bn, ids, 0.3);
        break;
      case 2:
        loss = cal_loss(tape, out.clothes_logits_head, out.clothes_logits_adv,
                        clothes, ids, clothes_map)
                   .adversarial_term;
        break;
      case 3: {
        Var l_id = id_loss(tape, out.id_logits, ids);
        Var l_tri = triplet_loss(tape, out.embedding_pre_bn, ids, 0.3);
        Var l_att = attention_loss(tape, out.attention_map, targets, weights);
        CalLoss cal =
            cal_loss(tape, out.clothes_logits_head, out.clothes_logits_adv,
                     clothes, ids, clothes_map);
        loss = total_loss(tape, l_id, l_tri, l_att, cal.adversarial_term,
                          weights);
        break;
      }
      default:
        loss = cal_loss(tape, out.clothes_logits_head, out.clothes_logits_adv,
                        clothes, ids, clothes_map)
                   .classifier_term;
        break;
    }
    if (tape_keep) {
      *out_keep = out;
      tape_keep->backward(loss);
    }
    return tape.val(loss)[0];
  }

  /// Samples a few coordinates of each listed parameter and compares the
  /// analytic gradient with central differences.
  void check(int kind, const std::function<bool(const std::string&)>& use,
             double step = 1e-4, double tol = 1e-3) {
    Tape tape;
    ModelOutputs out;
    loss_value(kind, &out, &tape);

    RngStream pick(1234 + static_cast<uint64_t>(kind));
    int checked = 0;
    for (auto& [name, tensor] : model.params()) {
      if (!use(name)) continue;
      const Var v = out.param_vars.at(name);
      const Tensor& g = tape.grad(v);
      const int64_t count = std::min<int64_t>(3, tensor.numel());
      for (int64_t k = 0; k < count; ++k) {
        const int64_t idx =
            static_cast<int64_t>(pick.uniform_int(
                static_cast<uint64_t>(tensor.numel())));
        const double saved = tensor[idx];
        tensor[idx] = saved + step;
        const double up = loss_value(kind);
        tensor[idx] = saved - step;
        const double dn = loss_value(kind);
        tensor[idx] = saved;
        const double fd = (up - dn) / (2 * step);
        const double rel = std::abs(fd - g[idx]) /
                           std::max({1.0, std::abs(fd), std::abs(g[idx])});
        INFO("param ", name, " idx ", idx, " fd ", fd, " grad ", g[idx]);
        CHECK(rel < tol);
        ++checked;
      }
    }
    CHECK(checked > 0);
  }
};

bool is_clothes_branch(const std::string& name) {
  return name.rfind("clothes_head", 0) == 0 ||
         name.rfind("clothes_cls", 0) == 0;
}

}  // namespace

TEST_CASE("attention loss gradients agree with finite differences") {
  FdRig rig;
  rig.check(0, [](const std::string& n) { return !is_clothes_branch(n); });
}

TEST_CASE("triplet loss gradients agree with finite differences") {
  FdRig rig;
  rig.check(1, [](const std::string& n) { return !is_clothes_branch(n); });
}

TEST_CASE("adversarial term gradients agree with finite differences") {
  FdRig rig;
  rig.check(2, [](const std::string& n) { return !is_clothes_branch(n); });
}

TEST_CASE("classifier term gradients agree on the clothes branch") {
  FdRig rig;
  rig.check(4, is_clothes_branch);
}

TEST_CASE("classifier term has zero gradient into the detached backbone") {
  FdRig rig;
  Tape tape;
  ModelOutputs out;
  rig.loss_value(4, &out, &tape);
  for (auto& [name, tensor] : rig.model.params()) {
    if (is_clothes_branch(name)) continue;
    const Tensor& g = tape.grad(out.param_vars.at(name));
    for (int64_t i = 0; i < g.numel(); ++i) CHECK(g[i] == 0.0);
  }
}

TEST_CASE("total loss gradients agree with finite differences") {
  FdRig rig;
  rig.check(3, [](const std::string& n) { return !is_clothes_branch(n); });
}
