// Command-line driver: train, sweep and postprocess runs, plus a hidden LP
// subcommand for debugging the exact oracle.

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "otf/error.hpp"
#include "otf/evaluation.hpp"
#include "otf/fair_trainer.hpp"
#include "otf/lp_oracle.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace otf;

namespace {

/// Everything a command needs. Serialized verbatim next to the artifacts.
struct RunConfig {
  std::string command;
  std::string data;
  std::string schema;
  bool synthetic = false;
  Eigen::Index synthetic_n = 2000;
  Eigen::Index synthetic_features = 5;
  Eigen::Index synthetic_groups = 2;
  double bias_strength = 2.0;
  std::string notion = "pdp";
  std::string reg = "otf";
  double alpha = 0.5;
  double epsilon = 1e-3;
  int epochs = 100;
  int epochs_pre = 25;
  double lr = 1e-3;
  Eigen::Index batch_size = 1000;
  double momentum = 0.0;
  int max_outer_sweeps = 1;
  std::string multiplier_update = "joint_rows";
  std::string cost_normalization = "none";
  double test_fraction = 0.2;
  std::vector<std::uint64_t> seeds;
  std::vector<double> alpha_grid{0.1, 0.3, 0.5, 0.7, 0.9};
  std::vector<double> epsilon_grid;
  std::vector<std::string> methods{"otf", "norm"};
  std::string out = "otf_out";
};

void to_json(json& j, const RunConfig& c) {
  j = json{{"command", c.command},
           {"data", c.data},
           {"schema", c.schema},
           {"synthetic", c.synthetic},
           {"synthetic_n", c.synthetic_n},
           {"synthetic_features", c.synthetic_features},
           {"synthetic_groups", c.synthetic_groups},
           {"bias_strength", c.bias_strength},
           {"notion", c.notion},
           {"reg", c.reg},
           {"alpha", c.alpha},
           {"epsilon", c.epsilon},
           {"epochs", c.epochs},
           {"epochs_pre", c.epochs_pre},
           {"lr", c.lr},
           {"batch_size", c.batch_size},
           {"momentum", c.momentum},
           {"max_outer_sweeps", c.max_outer_sweeps},
           {"multiplier_update", c.multiplier_update},
           {"cost_normalization", c.cost_normalization},
           {"test_fraction", c.test_fraction},
           {"seeds", c.seeds},
           {"alpha_grid", c.alpha_grid},
           {"epsilon_grid", c.epsilon_grid},
           {"methods", c.methods},
           {"out", c.out}};
}

/// Keys present in `j` replace the current values.
void merge(RunConfig& c, const json& j) {
  const auto take = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  for (const auto& [key, _] : j.items()) {
    static const std::vector<std::string> known{
        "command", "data", "schema", "synthetic", "synthetic_n", "synthetic_features", "synthetic_groups",
        "bias_strength", "notion", "reg", "alpha", "epsilon", "epochs", "epochs_pre", "lr", "batch_size",
        "momentum", "max_outer_sweeps", "multiplier_update", "cost_normalization", "test_fraction", "seeds",
        "alpha_grid", "epsilon_grid", "methods", "out"};
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("unknown config key '" + key + "'");
  }
  take("data", c.data);
  take("schema", c.schema);
  take("synthetic", c.synthetic);
  take("synthetic_n", c.synthetic_n);
  take("synthetic_features", c.synthetic_features);
  take("synthetic_groups", c.synthetic_groups);
  take("bias_strength", c.bias_strength);
  take("notion", c.notion);
  take("reg", c.reg);
  take("alpha", c.alpha);
  take("epsilon", c.epsilon);
  take("epochs", c.epochs);
  take("epochs_pre", c.epochs_pre);
  take("lr", c.lr);
  take("batch_size", c.batch_size);
  take("momentum", c.momentum);
  take("max_outer_sweeps", c.max_outer_sweeps);
  take("multiplier_update", c.multiplier_update);
  take("cost_normalization", c.cost_normalization);
  take("test_fraction", c.test_fraction);
  take("seeds", c.seeds);
  take("alpha_grid", c.alpha_grid);
  take("epsilon_grid", c.epsilon_grid);
  take("methods", c.methods);
  take("out", c.out);
}

std::vector<std::string> warnings;

void warn(const std::string& msg) {
  warnings.push_back(msg);
  std::cerr << "warning: " << msg << '\n';
}

TrainConfig train_config(const RunConfig& c, Regularizer reg, double alpha, double epsilon, std::uint64_t seed) {
  TrainConfig t;
  t.regularizer = reg;
  t.alpha = alpha;
  t.notion = parse_notion(c.notion);
  t.epochs = c.epochs;
  t.learning_rate = c.lr;
  t.batch_size = c.batch_size;
  t.momentum = c.momentum;
  t.seed = seed;
  t.cost_normalization = parse_cost_normalization(c.cost_normalization);
  t.solver.epsilon = epsilon;
  t.solver.max_outer_sweeps = c.max_outer_sweeps;
  t.solver.multiplier_update = parse_multiplier_update(c.multiplier_update);
  return t;
}

/// Checks every field before any work starts.
void validate(const RunConfig& c) {
  if (!c.synthetic && c.data.empty()) throw ConfigError("no dataset: pass --data or --synthetic");
  if (!c.synthetic && !fs::exists(c.data)) throw ConfigError("dataset '" + c.data + "' does not exist");
  if (!c.synthetic && c.schema.empty()) throw ConfigError("--schema is required with --data");
  if (!c.schema.empty() && !fs::exists(c.schema)) throw ConfigError("schema '" + c.schema + "' does not exist");
  if (c.seeds.empty()) throw ConfigError("seed list is empty");
  if (c.epochs_pre < 0) throw ConfigError("epochs-pre must be nonnegative");
  if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0, 1)");
  const Regularizer reg = parse_regularizer(c.reg);
  train_config(c, reg, c.alpha, c.epsilon, 0).validate();
  if (c.command == "sweep") {
    if (c.alpha_grid.empty()) throw ConfigError("alpha grid is empty");
    if (c.methods.empty()) throw ConfigError("method list is empty");
    for (const auto& m : c.methods) parse_regularizer(m);
    for (const double a : c.alpha_grid) train_config(c, reg, a, c.epsilon, 0).validate();
    for (const double e : c.epsilon_grid) train_config(c, reg, c.alpha, e, 0).validate();
  }
  double worst_eps = c.epsilon;
  for (const double e : c.epsilon_grid) worst_eps = std::max(worst_eps, e);
  if (worst_eps > kEpsilonWarningThreshold)
    warn("epsilon " + std::to_string(worst_eps) + " exceeds " + std::to_string(kEpsilonWarningThreshold) +
         "; the adjusted cost loses most of its unfairness signal");
}

Schema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("schema '" + path + "': " + e.what());
  }
  Schema s;
  s.label = j.at("label").get<std::string>();
  if (j.contains("positive_label")) s.positive_label = j.at("positive_label").get<std::string>();
  for (const auto& [name, kind] : j.at("sensitive").items())
    s.sensitive.emplace_back(name, parse_sensitive_kind(kind.get<std::string>()));
  if (j.contains("drop")) s.drop = j.at("drop").get<std::vector<std::string>>();
  return s;
}

TabularDataset load_data(const RunConfig& c) {
  if (c.synthetic) {
    SyntheticSpec spec;
    spec.n = c.synthetic_n;
    spec.d_X = c.synthetic_features;
    spec.group_count = c.synthetic_groups;
    spec.bias_strength = c.bias_strength;
    spec.seed = 0;
    return generate_synthetic(spec);
  }
  auto ds = load_csv(c.data, load_schema(c.schema));
  for (const auto& w : ds.warnings) warn(w);
  return ds;
}

/// Writes through a temporary file and renames it into place.
void write_atomic(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw DataError("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

json metrics_json(const MetricsReport& m) {
  json j{{"split", to_string(m.split)}, {"auc", m.auc}, {"pdp_violation", m.pdp_violation},
         {"peo_violation", m.peo_violation}, {"warnings", m.warnings}};
  for (const auto& [name, v] : m.per_attribute) j["per_attribute"][name] = {{"pdp", v.first}, {"peo", v.second}};
  return j;
}

json epoch_json(const EpochRecord& r) {
  json j{{"epoch", r.epoch}, {"cross_entropy", r.cross_entropy}, {"regularizer", r.regularizer},
         {"violation", r.violation}, {"pdp_violation", r.pdp_violation}, {"auc", r.auc}};
  if (r.otfe) j["otfe"] = *r.otfe;
  if (r.otfre) j["otfre"] = *r.otfre;
  if (const auto g = r.gap()) j["gap"] = *g;
  return j;
}

std::string trace_jsonl(const TrainingTrace& t) {
  std::ostringstream out;
  if (t.initial) out << epoch_json(*t.initial).dump() << '\n';
  for (const auto& r : t.epochs) out << epoch_json(r).dump() << '\n';
  return out.str();
}

int worker_count() {
  if (const char* env = std::getenv("OTF_WORKERS")) {
    try {
      const int w = std::stoi(env);
      if (w >= 1) return w;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("OTF_WORKERS must be a positive integer, got '") + env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs `jobs` tasks on at most OTF_WORKERS threads.
void run_pool(std::size_t jobs, const std::function<void(std::size_t)>& task) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(worker_count()), jobs);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < jobs; k = next++) task(k);
    });
  for (auto& t : pool) t.join();
}

void write_config(const RunConfig& c) {
  write_atomic(fs::path(c.out) / "config.json", json(c).dump(2) + "\n");
}

int cmd_train(const RunConfig& c) {
  const auto ds = load_data(c);
  const Regularizer reg = parse_regularizer(c.reg);
  write_config(c);
  for (const auto seed : c.seeds) {
    const auto [train_set, test_set] = train_test_split(ds, seed, c.test_fraction);
    const auto cfg = train_config(c, reg, reg == Regularizer::none ? 0.0 : c.alpha, c.epsilon, seed);
    const auto [model, trace] = train(train_set, cfg);
    const fs::path dir = fs::path(c.out) / ("seed_" + std::to_string(seed));
    write_atomic(dir / "checkpoint.json", model.to_json().dump(2) + "\n");
    write_atomic(dir / "trace.jsonl", trace_jsonl(trace));
    const json metrics{{"train", metrics_json(evaluate_scores(model.predict(train_set.X), train_set, Split::train))},
                       {"test", metrics_json(evaluate_scores(model.predict(test_set.X), test_set, Split::test))}};
    write_atomic(dir / "metrics.json", metrics.dump(2) + "\n");
    std::cout << "seed " << seed << ": test auc " << metrics["test"]["auc"].get<double>() << ", pdp "
              << metrics["test"]["pdp_violation"].get<double>() << ", peo "
              << metrics["test"]["peo_violation"].get<double>() << '\n';
  }
  return 0;
}

struct Cell {
  std::string method;
  double alpha;
  double epsilon;
  std::uint64_t seed;
};

int cmd_sweep(const RunConfig& c) {
  const auto ds = load_data(c);
  write_config(c);
  const std::vector<double> eps_grid = c.epsilon_grid.empty() ? std::vector<double>{c.epsilon} : c.epsilon_grid;
  std::vector<Cell> cells;
  for (const auto seed : c.seeds) cells.push_back({"none", 0.0, c.epsilon, seed});
  for (const auto& m : c.methods) {
    if (m == "none") continue;
    for (const double a : c.alpha_grid)
      for (const double e : m == "otf" ? eps_grid : std::vector<double>{c.epsilon})
        for (const auto seed : c.seeds) cells.push_back({m, a, e, seed});
  }

  std::vector<std::optional<RunRecord>> results(cells.size());
  std::vector<std::string> errors(cells.size());
  std::mutex log;
  run_pool(cells.size(), [&](std::size_t k) {
    const auto& cell = cells[k];
    try {
      const auto [train_set, test_set] = train_test_split(ds, cell.seed, c.test_fraction);
      auto cfg = train_config(c, parse_regularizer(cell.method), cell.alpha, cell.epsilon, cell.seed);
      cfg.record_metrics = false;
      const auto model = train(train_set, cfg).first;
      RunRecord r{cell.method, cell.alpha, c.notion, cell.epsilon, cell.seed,
                  evaluate_scores(model.predict(test_set.X), test_set, Split::test)};
      results[k] = std::move(r);
    } catch (const std::exception& e) {
      errors[k] = e.what();
      std::lock_guard<std::mutex> lock(log);
      std::cerr << "cell " << cell.method << " alpha=" << cell.alpha << " epsilon=" << cell.epsilon
                << " seed=" << cell.seed << " failed: " << e.what() << '\n';
    }
  });

  std::ostringstream runs_csv;
  runs_csv << "method,alpha,epsilon,seed,status,auc,pdp_violation,peo_violation,error\n";
  std::vector<RunRecord> done;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const auto& cell = cells[k];
    runs_csv << cell.method << ',' << cell.alpha << ',' << cell.epsilon << ',' << cell.seed << ',';
    if (results[k]) {
      const auto& m = results[k]->metrics;
      runs_csv << "ok," << m.auc << ',' << m.pdp_violation << ',' << m.peo_violation << ",\n";
      done.push_back(*results[k]);
    } else {
      std::string err = errors[k];
      std::replace(err.begin(), err.end(), '"', '\'');
      runs_csv << "failed,,,,\"" << err << "\"\n";
    }
  }
  write_atomic(fs::path(c.out) / "runs.csv", runs_csv.str());

  // Groups with fewer than two finished runs cannot be summarized; drop them.
  std::map<std::tuple<std::string, double, double>, int> counts;
  for (const auto& r : done) ++counts[{r.method, r.alpha, r.epsilon}];
  std::vector<RunRecord> usable;
  for (const auto& r : done)
    if (counts[{r.method, r.alpha, r.epsilon}] >= 2) usable.push_back(r);
  if (usable.empty()) throw NumericError("sweep produced no configuration with at least 2 finished runs");
  const auto rows = aggregate_sweep(usable);

  std::ostringstream table;
  table << "method,alpha,epsilon,notion,runs,auc_mean,auc_se,violation_mean,violation_se,pdp_mean,pdp_se,peo_mean,"
           "peo_se\n";
  json j = json::array();
  for (const auto& r : rows) {
    table << r.method << ',' << r.alpha << ',' << r.epsilon << ',' << r.notion << ',' << r.runs << ',' << r.auc_mean
          << ',' << r.auc_se << ',' << r.violation_mean() << ',' << r.violation_se() << ',' << r.pdp_mean << ','
          << r.pdp_se << ',' << r.peo_mean << ',' << r.peo_se << '\n';
    j.push_back({{"method", r.method}, {"alpha", r.alpha}, {"epsilon", r.epsilon}, {"notion", r.notion},
                 {"runs", r.runs}, {"auc_mean", r.auc_mean}, {"auc_se", r.auc_se},
                 {"violation_mean", r.violation_mean()}, {"violation_se", r.violation_se()}});
  }
  write_atomic(fs::path(c.out) / "sweep.csv", table.str());
  write_atomic(fs::path(c.out) / "sweep.json", j.dump(2) + "\n");
  std::cout << table.str();
  return 0;
}

int cmd_postprocess(const RunConfig& c) {
  const auto ds = load_data(c);
  write_config(c);
  std::vector<TrainingTrace> traces;
  for (const auto seed : c.seeds) {
    const auto train_set = train_test_split(ds, seed, c.test_fraction).first;
    LogisticModel model = LogisticModel::zeros(train_set);
    if (c.epochs_pre > 0) {
      auto pre = train_config(c, Regularizer::none, 0.0, c.epsilon, seed);
      pre.epochs = c.epochs_pre;
      pre.record_metrics = false;
      model = train(train_set, pre).first;
    } else {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> normal(0.0, 1.0);
      for (auto& w : model.weights) w = normal(rng);
    }
    const auto cfg = train_config(c, Regularizer::otf, 1.0, c.epsilon, seed);
    auto trace = postprocess(model, train_set, cfg).second;
    write_atomic(fs::path(c.out) / ("seed_" + std::to_string(seed)) / "trace.jsonl", trace_jsonl(trace));
    traces.push_back(std::move(trace));
  }

  // Mean and SD across seeds of the four curves, one row per epoch.
  std::ostringstream csv;
  csv << "epoch,otfe_mean,otfe_sd,otfre_mean,otfre_sd,gap_mean,gap_sd,pdp_mean,pdp_sd\n";
  const std::size_t rows = traces.front().epochs.size() + 1;
  for (std::size_t e = 0; e < rows; ++e) {
    std::vector<double> cols[4];
    for (const auto& t : traces) {
      const EpochRecord& r = e == 0 ? *t.initial : t.epochs[e - 1];
      cols[0].push_back(*r.otfe);
      cols[1].push_back(*r.otfre);
      cols[2].push_back(*r.gap());
      cols[3].push_back(r.pdp_violation);
    }
    csv << e;
    for (const auto& v : cols) {
      const double k = static_cast<double>(v.size());
      const double mean = std::accumulate(v.begin(), v.end(), 0.0) / k;
      double ss = 0.0;
      for (const double x : v) ss += (x - mean) * (x - mean);
      csv << ',' << mean << ',' << (v.size() > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0);
    }
    csv << '\n';
  }
  write_atomic(fs::path(c.out) / "postprocess.csv", csv.str());
  std::cout << csv.str();
  return 0;
}

/// Reads {"h": [...], "C": [[...]], "G": [[...]], "relaxed": bool} and prints the LP result.
int cmd_lp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open LP instance '" + path + "'");
  const json j = json::parse(in);
  const auto h = j.at("h").get<std::vector<double>>();
  const auto C = j.at("C").get<std::vector<std::vector<double>>>();
  const auto G = j.at("G").get<std::vector<std::vector<double>>>();
  const auto n = static_cast<Eigen::Index>(h.size());
  LpInstance inst;
  inst.h = Eigen::Map<const Eigen::VectorXd>(h.data(), n);
  inst.C.C.resize(n, n);
  inst.G.G.resize(static_cast<Eigen::Index>(G.size()), n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < n; ++k) inst.C.C(i, k) = C.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(k));
  for (Eigen::Index r = 0; r < inst.G.G.rows(); ++r)
    for (Eigen::Index k = 0; k < n; ++k) inst.G.G(r, k) = G.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(k));
  inst.relaxed = j.value("relaxed", false);
  const auto r = solve_lp(inst);
  json out{{"cost", r.cost}, {"coupling", json::array()}};
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd row = r.coupling.row(i);
    out["coupling"].push_back(std::vector<double>(row.data(), row.data() + n));
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

std::vector<std::uint64_t> seed_range(int count) {
  std::vector<std::uint64_t> s(static_cast<std::size_t>(std::max(count, 0)));
  std::iota(s.begin(), s.end(), std::uint64_t{0});
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transport-to-fairness regularized logistic regression"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string config_file;
  int seed_count = -1;
  std::string lp_path;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_file, "JSON config file; its keys override flags");
    sub->add_option("--data", cfg.data, "CSV dataset");
    sub->add_option("--schema", cfg.schema, "JSON schema: label, positive_label, sensitive {name: kind}, drop");
    sub->add_flag("--synthetic", cfg.synthetic, "use the synthetic biased dataset");
    sub->add_option("--synthetic-n", cfg.synthetic_n, "synthetic sample count");
    sub->add_option("--synthetic-groups", cfg.synthetic_groups, "synthetic group count");
    sub->add_option("--bias-strength", cfg.bias_strength, "synthetic group shift of feature 0");
    sub->add_option("--notion", cfg.notion, "pdp or peo");
    sub->add_option("--epsilon", cfg.epsilon, "entropic smoothing strength");
    sub->add_option("--epochs", cfg.epochs, "training epochs");
    sub->add_option("--lr", cfg.lr, "learning rate");
    sub->add_option("--batch-size", cfg.batch_size, "mini-batch size");
    sub->add_option("--momentum", cfg.momentum, "heavy-ball momentum");
    sub->add_option("--sweeps", cfg.max_outer_sweeps, "solver sweeps per training step");
    sub->add_option("--multiplier-update", cfg.multiplier_update, "joint_rows or fixed_rows");
    sub->add_option("--cost-normalization", cfg.cost_normalization, "none or mean_scaled");
    sub->add_option("--seeds", seed_count, "number of split seeds (0..k-1)");
    sub->add_option("--out", cfg.out, "output directory");
  };

  auto* train_cmd = app.add_subcommand("train", "train one configuration per seed");
  add_common(train_cmd);
  train_cmd->add_option("--reg", cfg.reg, "otf, norm or none");
  train_cmd->add_option("--alpha", cfg.alpha, "regularization strength in [0, 1]");

  auto* sweep_cmd = app.add_subcommand("sweep", "method x alpha x seed grid");
  add_common(sweep_cmd);
  sweep_cmd->add_option("--methods", cfg.methods, "regularizers to sweep")->delimiter(',');
  sweep_cmd->add_option("--alpha-grid", cfg.alpha_grid, "alpha values")->delimiter(',');
  sweep_cmd->add_option("--epsilon-grid", cfg.epsilon_grid, "epsilon values for otf")->delimiter(',');

  auto* post_cmd = app.add_subcommand("postprocess", "cross-entropy pretraining then adjusted-cost descent");
  add_common(post_cmd);
  post_cmd->add_option("--epochs-pre", cfg.epochs_pre, "pretraining epochs");

  auto* lp_cmd = app.add_subcommand("lp", "");
  lp_cmd->group("");
  lp_cmd->add_option("instance", lp_path, "JSON LP instance")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*lp_cmd) return cmd_lp(lp_path);
    cfg.command = app.get_subcommands().front()->get_name();
    if (cfg.command == "train") {
      cfg.seeds = {0};
    } else {
      cfg.seeds = seed_range(cfg.command == "sweep" ? 10 : 5);
      cfg.epochs = cfg.command == "postprocess" ? 25 : cfg.epochs;
    }
    if (seed_count >= 0) cfg.seeds = seed_range(seed_count);
    for (CLI::App* sub : {sweep_cmd, post_cmd}) {
      if (*sub && sub->count("--epochs")) cfg.epochs = sub->get_option("--epochs")->as<int>();
    }
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      if (!in) throw ConfigError("cannot open config '" + config_file + "'");
      try {
        merge(cfg, json::parse(in));
      } catch (const json::exception& e) {
        throw ConfigError("config '" + config_file + "': " + e.what());
      }
    }
    validate(cfg);
    if (cfg.command == "train") return cmd_train(cfg);
    if (cfg.command == "sweep") return cmd_sweep(cfg);
    return cmd_postprocess(cfg);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
