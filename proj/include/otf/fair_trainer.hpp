#pragma once

// Logistic regression trained by mini-batch gradient descent on
//
//   (1 - alpha) * cross_entropy(h) + alpha * regularizer(h),
//
// where the regularizer is the adjusted entropic transport-to-fairness cost,
// the L1 norm of the fairness-constraint residual, or absent. Regularizers are
// evaluated per batch on the batch columns of G and the batch cost block.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "otf/error.hpp"
#include "otf/evaluation.hpp"
#include "otf/fairness_constraints.hpp"
#include "otf/otf_solver.hpp"
#include "otf/tabular_data.hpp"
#include "otf/transport_cost.hpp"

namespace otf {

enum class Regularizer { otf, norm, none };

inline std::string to_string(Regularizer r) {
  switch (r) {
    case Regularizer::otf: return "otf";
    case Regularizer::norm: return "norm";
    case Regularizer::none: return "none";
  }
  return "?";
}

inline Regularizer parse_regularizer(const std::string& s) {
  if (s == "otf") return Regularizer::otf;
  if (s == "norm") return Regularizer::norm;
  if (s == "none") return Regularizer::none;
  throw ConfigError("unknown regularizer '" + s + "' (expected otf, norm or none)");
}

inline double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

struct LogisticModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  std::vector<std::string> feature_names;
  std::vector<ColumnScaling> scaling;

  static LogisticModel zeros(const TabularDataset& ds) {
    return {Eigen::VectorXd::Zero(ds.feature_count()), 0.0, ds.column_names, ds.scaling};
  }

  Eigen::VectorXd logits(const Eigen::Ref<const Eigen::MatrixXd>& X) const {
    return (X * weights).array() + bias;
  }

  Eigen::VectorXd predict(const Eigen::Ref<const Eigen::MatrixXd>& X) const {
    return logits(X).unaryExpr([](double z) { return sigmoid(z); });
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["weights"] = std::vector<double>(weights.data(), weights.data() + weights.size());
    j["bias"] = bias;
    j["feature_names"] = feature_names;
    j["preprocessing"] = nlohmann::json::array();
    for (const auto& s : scaling) j["preprocessing"].push_back({{"column", s.column}, {"mean", s.mean}, {"scale", s.scale}});
    return j;
  }

  static LogisticModel from_json(const nlohmann::json& j) {
    LogisticModel m;
    const auto w = j.at("weights").get<std::vector<double>>();
    m.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    m.bias = j.at("bias").get<double>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    for (const auto& s : j.at("preprocessing"))
      m.scaling.push_back({s.at("column").get<std::string>(), s.at("mean").get<double>(), s.at("scale").get<double>()});
    if (!m.weights.allFinite() || !std::isfinite(m.bias)) throw DataError("model checkpoint has non-finite parameters");
    return m;
  }
};

struct TrainConfig {
  double alpha = 0.5;
  Regularizer regularizer = Regularizer::otf;
  Notion notion = Notion::pdp;
  int epochs = 100;
  double learning_rate = 1e-3;
  Eigen::Index batch_size = 1000;
  std::uint64_t seed = 0;
  double momentum = 0.0;  // heavy-ball coefficient; 0 is plain gradient descent
  bool warm_start = true;
  CostNormalization cost_normalization = CostNormalization::none;
  SolverConfig solver = training_solver_defaults();
  /// Solver settings for the per-epoch OTF terms recorded in the trace.
  SolverConfig trace_solver = trace_solver_defaults();
  bool record_metrics = true;  // per-epoch metrics and OTF terms in the trace

  static SolverConfig training_solver_defaults() {
    SolverConfig s;
    s.max_outer_sweeps = 1;
    s.compute_marginals = false;
    return s;
  }

  static SolverConfig trace_solver_defaults() {
    SolverConfig s;
    s.max_outer_sweeps = 200;
    s.compute_marginals = false;
    return s;
  }

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
    if (epochs < 0) throw ConfigError("epochs must be nonnegative");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (batch_size < 1) throw ConfigError("batch size must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
    if (notion == Notion::composite) throw ConfigError("training notion must be pdp or peo");
    solver.validate();
    trace_solver.validate();
  }
};

struct EpochRecord {
  int epoch = 0;
  double cross_entropy = 0.0;
  double regularizer = 0.0;  // mean per-batch regularizer value during the epoch
  std::optional<double> otfe;    // on the trace batch at epoch end
  std::optional<double> otfre;
  double violation = 0.0;  // of the trained notion, on the training data
  double pdp_violation = 0.0;
  double auc = 0.0;

  std::optional<double> gap() const {
    if (otfe && otfre) return *otfe - *otfre;
    return std::nullopt;
  }
};

struct TrainingTrace {
  std::optional<EpochRecord> initial;  // state before the first update (epoch 0)
  std::vector<EpochRecord> epochs;
};

/// L1 norm of the batch fairness residual divided by the batch size, and its
/// gradient with respect to h (sign(0) = 0).
struct NormValue {
  double value;
  Eigen::VectorXd gradient;
};

inline NormValue norm_regularizer(const Eigen::Ref<const Eigen::VectorXd>& h, const ConstraintMatrix& G) {
  if (G.samples() != h.size()) throw DimensionError("norm_regularizer: G and h disagree on sample count");
  const double b = static_cast<double>(h.size());
  const Eigen::VectorXd residual = G.G * h;
  const Eigen::VectorXd sign = residual.unaryExpr([](double v) { return double((v > 0.0) - (v < 0.0)); });
  return {residual.cwiseAbs().sum() / b, G.G.transpose() * sign / b};
}

inline double cross_entropy(const Eigen::Ref<const Eigen::VectorXd>& h, const Eigen::Ref<const Eigen::VectorXd>& y) {
  constexpr double kFloor = 1e-15;
  const Eigen::ArrayXd p = h.array().max(kFloor).min(1.0 - kFloor);
  return -(y.array() * p.log() + (1.0 - y.array()) * (1.0 - p).log()).mean();
}

/// Gradient of the joint objective on one batch with respect to model
/// parameters (weights, then bias as the last entry).
struct BatchGradient {
  Eigen::VectorXd grad;
  double cross_entropy = 0.0;
  double regularizer = 0.0;
};

class FairTrainer {
 public:
  FairTrainer(const TabularDataset& train, TrainConfig cfg) : data_(train), cfg_(std::move(cfg)) {
    cfg_.validate();
    cfg_.trace_solver.epsilon = cfg_.solver.epsilon;
    cfg_.trace_solver.score_floor = cfg_.solver.score_floor;
    if (train.size() < 2) throw DataError("training set needs at least 2 samples");
    if (cfg_.regularizer != Regularizer::none) G_ = build_constraints(train, cfg_.notion);
    std::vector<Eigen::Index> all(static_cast<std::size_t>(train.size()));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    std::mt19937_64 rng(cfg_.seed ^ 0x9e3779b97f4a7c15ULL);
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(static_cast<std::size_t>(std::min(cfg_.batch_size, train.size())));
    trace_batch_ = std::move(all);
  }

  const TrainConfig& config() const { return cfg_; }
  const std::optional<ConstraintMatrix>& constraints() const { return G_; }

  BatchGradient batch_gradient(const LogisticModel& model, const std::vector<Eigen::Index>& idx) {
    const Eigen::MatrixXd Xb = data_.X(idx, Eigen::all);
    const Eigen::VectorXd yb = data_.Y(idx);
    const Eigen::VectorXd h = model.predict(Xb);
    const double b = static_cast<double>(idx.size());

    BatchGradient out;
    out.cross_entropy = cross_entropy(h, yb);
    Eigen::VectorXd dlogit = (1.0 - cfg_.alpha) * (h - yb) / b;

    if (cfg_.regularizer != Regularizer::none) {
      const ConstraintMatrix Gb = restrict_to_batch(*G_, idx);
      Eigen::VectorXd dh;
      if (cfg_.regularizer == Regularizer::norm) {
        auto r = norm_regularizer(h, Gb);
        out.regularizer = r.value;
        dh = std::move(r.gradient);
      } else {
        const CostMatrix Cb = batch_cost(data_.X, idx, cfg_.cost_normalization);
        auto r = adjusted_otf(h, Cb, Gb, cfg_.solver, cfg_.warm_start ? &warm_ : nullptr);
        out.regularizer = r.cost / b;
        dh = r.gradient / b;
        // Clamped scores do not move the solver input.
        for (Eigen::Index i = 0; i < h.size(); ++i)
          if (h(i) < cfg_.solver.score_floor) dh(i) = 0.0;
      }
      dlogit += cfg_.alpha * dh.cwiseProduct((h.array() * (1.0 - h.array())).matrix());
    }

    out.grad.resize(Xb.cols() + 1);
    out.grad.head(Xb.cols()) = Xb.transpose() * dlogit;
    out.grad(Xb.cols()) = dlogit.sum();
    return out;
  }

  /// Runs `cfg.epochs` epochs of mini-batch descent starting from `model`.
  TrainingTrace fit(LogisticModel& model, bool record_initial = false) {
    TrainingTrace trace;
    if (record_initial) trace.initial = snapshot(model, 0, 0.0);
    std::mt19937_64 rng(cfg_.seed);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(data_.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Eigen::VectorXd velocity = Eigen::VectorXd::Zero(model.weights.size() + 1);
    const auto bsz = static_cast<std::size_t>(cfg_.batch_size);

    for (int epoch = 1; epoch <= cfg_.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      double reg_sum = 0.0;
      int batches = 0;
      for (std::size_t start = 0; start < order.size(); start += bsz) {
        const std::vector<Eigen::Index> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                            order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + bsz)));
        const auto g = batch_gradient(model, idx);
        if (!g.grad.allFinite() || !std::isfinite(g.cross_entropy))
          throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batches));
        velocity = cfg_.momentum * velocity - cfg_.learning_rate * g.grad;
        model.weights += velocity.head(model.weights.size());
        model.bias += velocity(model.weights.size());
        reg_sum += g.regularizer;
        ++batches;
      }
      trace.epochs.push_back(snapshot(model, epoch, reg_sum / batches));
    }
    return trace;
  }

 private:
  EpochRecord snapshot(const LogisticModel& model, int epoch, double regularizer) {
    EpochRecord r;
    r.epoch = epoch;
    r.regularizer = regularizer;
    const Eigen::VectorXd h = model.predict(data_.X);
    r.cross_entropy = cross_entropy(h, data_.Y);
    if (!std::isfinite(r.cross_entropy)) throw NumericError("training diverged at epoch " + std::to_string(epoch));
    if (cfg_.record_metrics) {
      r.pdp_violation = pdp_violation(h, data_.S);
      r.violation = cfg_.notion == Notion::peo ? peo_violation(h, data_.S, data_.Y) : r.pdp_violation;
      r.auc = auc(h, data_.Y);
    }
    if (cfg_.record_metrics && cfg_.regularizer == Regularizer::otf) {
      const Eigen::VectorXd hb = h(trace_batch_);
      const ConstraintMatrix Gb = restrict_to_batch(*G_, trace_batch_);
      const CostMatrix Cb = batch_cost(data_.X, trace_batch_, cfg_.cost_normalization);
      WarmStart* warm = cfg_.warm_start ? &trace_warm_ : nullptr;
      const auto eq = solve_otfe(hb, Cb, Gb, cfg_.trace_solver, warm);
      const auto re = solve_otfre(hb, Cb, Gb, cfg_.trace_solver, warm);
      r.otfe = eq.objective;
      r.otfre = re.objective;
      if (warm) {
        trace_warm_.mu = eq.equality_duals().mu;
        trace_warm_.phi = re.relaxed_duals().phi;
        trace_warm_.psi = re.relaxed_duals().psi;
      }
    }
    return r;
  }

  const TabularDataset& data_;
  TrainConfig cfg_;
  std::optional<ConstraintMatrix> G_;
  WarmStart warm_;
  WarmStart trace_warm_;
  std::vector<Eigen::Index> trace_batch_;
};

/// Trains from zero-initialized parameters.
inline std::pair<LogisticModel, TrainingTrace> train(const TabularDataset& ds, const TrainConfig& cfg) {
  FairTrainer trainer(ds, cfg);
  auto model = LogisticModel::zeros(ds);
  auto trace = trainer.fit(model);
  return {std::move(model), std::move(trace)};
}

/// Continues from a trained model minimizing the adjusted OTF cost alone.
inline std::pair<LogisticModel, TrainingTrace> postprocess(const LogisticModel& model, const TabularDataset& ds,
                                                           const TrainConfig& cfg) {
  if (cfg.alpha != 1.0) throw ConfigError("postprocessing requires alpha = 1");
  if (cfg.regularizer != Regularizer::otf) throw ConfigError("postprocessing requires the otf regularizer");
  if (model.weights.size() != ds.feature_count()) throw DimensionError("model and dataset feature counts differ");
  FairTrainer trainer(ds, cfg);
  auto out = model;
  auto trace = trainer.fit(out, true);
  return {std::move(out), std::move(trace)};
}

}  // namespace otf
