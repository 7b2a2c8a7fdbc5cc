#include "msp/eval/probe.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "msp/core/error.hpp"
#include "msp/core/rng.hpp"
#include "msp/nn/adam.hpp"
#include "msp/nn/ops.hpp"
#include "msp/nn/tape.hpp"

namespace msp {

void ProbeConfig::validate() const {
  if (!(train_fraction > 0.0) || !(train_fraction < 1.0)) {
    throw ConfigError("probe train fraction must lie in (0,1)");
  }
  if (epochs <= 0) throw ConfigError("probe epochs must be positive");
  if (!(lr > 0.0)) throw ConfigError("probe learning rate must be positive");
  if (weight_decay < 0.0) {
    throw ConfigError("probe weight decay must be non-negative");
  }
}

namespace {

nn::Tensor rows_to_tensor(const std::vector<std::vector<double>>& embeddings,
                          const std::vector<size_t>& rows, int dim) {
  nn::Tensor t({static_cast<int>(rows.size()), dim});
  for (size_t i = 0; i < rows.size(); ++i) {
    const std::vector<double>& e = embeddings[rows[i]];
    for (int j = 0; j < dim; ++j) {
      t.at2(static_cast<int>(i), j) = e[static_cast<size_t>(j)];
    }
  }
  return t;
}

}  // namespace

ProbeReport linear_probe(const std::vector<std::vector<double>>& embeddings,
                         const std::vector<int>& labels,
                         const std::string& target, const ProbeConfig& config) {
  config.validate();
  if (embeddings.size() != labels.size()) {
    throw ArgumentError("probe embedding/label count mismatch");
  }
  if (embeddings.empty()) throw EvalError("probe received no samples");
  const int dim = static_cast<int>(embeddings.front().size());
  for (const std::vector<double>& e : embeddings) {
    if (static_cast<int>(e.size()) != dim) {
      throw ArgumentError("probe embeddings have inconsistent dimensions");
    }
  }

  // Remap arbitrary label values to contiguous class ids.
  std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) {
    throw EvalError("probe needs at least two distinct label values");
  }
  std::map<int, int> class_of;
  for (int v : distinct) {
    class_of.emplace(v, static_cast<int>(class_of.size()));
  }
  const int num_classes = static_cast<int>(class_of.size());

  // Stratified split keeps every class represented in the training half.
  RngStream rng(config.seed);
  std::map<int, std::vector<size_t>> by_class;
  for (size_t i = 0; i < labels.size(); ++i) {
    by_class[class_of.at(labels[i])].push_back(i);
  }
  std::vector<size_t> train_rows;
  std::vector<size_t> test_rows;
  for (auto& [cls, rows] : by_class) {
    RngStream class_rng = rng.derive("probe-split", cls);
    class_rng.shuffle(rows);
    size_t n_train = static_cast<size_t>(
        config.train_fraction * static_cast<double>(rows.size()) + 0.5);
    n_train = std::max<size_t>(1, n_train);
    if (rows.size() > 1) n_train = std::min(n_train, rows.size() - 1);
    for (size_t i = 0; i < rows.size(); ++i) {
      (i < n_train ? train_rows : test_rows).push_back(rows[i]);
    }
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  if (test_rows.empty()) throw EvalError("probe has no held-out samples");

  nn::Tensor x_train = rows_to_tensor(embeddings, train_rows, dim);
  std::vector<int> y_train;
  y_train.reserve(train_rows.size());
  for (size_t r : train_rows) y_train.push_back(class_of.at(labels[r]));

  // Softmax regression is convex, so zero init is both fine and seed-free.
  std::map<std::string, nn::Tensor> params;
  params.emplace("probe.w", nn::Tensor({num_classes, dim}, 0.0));
  params.emplace("probe.b", nn::Tensor({num_classes}, 0.0));
  nn::Adam optimizer(config.lr, config.weight_decay);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    nn::Tape tape;
    nn::Var x = tape.leaf(x_train);
    nn::Var w = tape.leaf(params.at("probe.w"));
    nn::Var b = tape.leaf(params.at("probe.b"));
    nn::Var loss = nn::softmax_ce_mean(tape, nn::linear(tape, x, w, b), y_train);
    tape.backward(loss);
    std::map<std::string, nn::Var> vars{{"probe.w", w}, {"probe.b", b}};
    std::map<std::string, nn::Tensor> grads;
    for (const auto& [name, var] : vars) grads.emplace(name, tape.grad(var));
    optimizer.step(params, grads);
  }

  // Held-out accuracy; argmax ties resolve to the lowest class id.
  const nn::Tensor& w = params.at("probe.w");
  const nn::Tensor& b = params.at("probe.b");
  int correct = 0;
  for (size_t r : test_rows) {
    int best = 0;
    double best_score = 0.0;
    for (int c = 0; c < num_classes; ++c) {
      double score = b[c];
      for (int j = 0; j < dim; ++j) {
        score += w.at2(c, j) * embeddings[r][static_cast<size_t>(j)];
      }
      if (c == 0 || score > best_score) {
        best = c;
        best_score = score;
      }
    }
    if (best == class_of.at(labels[r])) ++correct;
  }

  ProbeReport report;
  report.target = target;
  report.accuracy =
      static_cast<double>(correct) / static_cast<double>(test_rows.size());
  report.num_train = static_cast<int>(train_rows.size());
  report.num_test = static_cast<int>(test_rows.size());
  report.num_classes = num_classes;
  return report;
}

}  // namespace msp
