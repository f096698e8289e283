// Copyright 2026 The RecDiff Authors.
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

// recdiff: train, evaluate and probe the social-diffusion recommender.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "recdiff/recdiff.hpp"

namespace fs = std::filesystem;
using namespace recdiff;

namespace {

enum ExitCode { kOk = 0, kConfig = 1, kData = 2, kDivergence = 3 };

enum class Kind { text, integer, real, flag, list };

struct Setting {
  std::string key;
  std::string help;
  std::string fallback;
  Kind kind = Kind::text;
  bool model = false;  // forwarded to ModelConfig::set
};

std::vector<Setting> model_settings() {
  const ModelConfig d;
  const auto text = d.to_text();
  auto def = [&](const std::string& key) {
    const auto at = text.find(key + "=");
    return text.substr(at + key.size() + 1, text.find('\n', at) - at - key.size() - 1);
  };
  auto m = [&](std::string key, std::string help, Kind k) {
    return Setting{key, std::move(help), def(key), k, true};
  };
  return {
      m("variant", "full, -D (no diffusion), -S (no social) or dae", Kind::text),
      m("d", "embedding width", Kind::integer),
      m("d-time", "time embedding width", Kind::integer),
      m("hidden", "denoiser / autoencoder hidden width, 0 means d", Kind::integer),
      m("layers", "graph convolution layers", Kind::integer),
      m("T", "diffusion steps", Kind::integer),
      m("inference-steps", "reverse steps at evaluation, 0 means T", Kind::integer),
      m("lr", "Adam learning rate", Kind::real),
      m("batch-size", "triplets per minibatch", Kind::integer),
      m("lambda1", "weight of the diffusion loss", Kind::real),
      m("lambda2", "decoupled weight decay", Kind::real),
      m("tau", "noise scale factor", Kind::real),
      m("s-max", "upper end of the noise sequence", Kind::real),
      m("s-min", "lower end of the noise sequence", Kind::real),
      m("loss", "elbo (weighted matching terms) or recon-only", Kind::text),
      m("activation", "denoiser activation: leaky_relu, relu, tanh, identity", Kind::text),
      m("slope", "leaky ReLU negative slope", Kind::real),
      m("weight-transform", "learn a d x d matrix per graph layer", Kind::flag),
      m("share-social-table", "social encoder reuses the interaction user table", Kind::flag),
      m("sinusoidal-time", "fixed sinusoidal step encoding instead of a learned table", Kind::flag),
      m("stochastic-inference", "sample during the reverse pass instead of taking the mean", Kind::flag),
      m("reverse-mean", "posterior or literal reverse-step mean", Kind::text),
      m("reuse-step", "one step draw feeds both the loss and the fusion term", Kind::flag),
      m("dae-mask-rate", "coordinate mask rate of the dae variant", Kind::real),
      m("fuse-raw-social", "full variant fuses raw social embeddings (ablation aid)", Kind::flag),
  };
}

std::vector<Setting> training_settings() {
  return {
      {"data", "dataset directory holding interactions.txt and social.txt", "", Kind::text},
      {"out", "output directory", "run", Kind::text},
      {"seed", "seed for initialization, sampling and noise", "7", Kind::integer},
      {"split-seed", "seed of the 7:1:2 split, defaults to --seed", "", Kind::integer},
      {"epochs", "maximum epochs", "200", Kind::integer},
      {"patience", "epochs without valid Recall@20 gain before stopping", "20", Kind::integer},
      {"N", "comma-separated cutoffs", "10,20,40", Kind::list},
      {"mask-valid", "mask validation items when ranking for test", "1", Kind::flag},
      {"track-test", "also record test metrics every epoch", "0", Kind::flag},
      {"threads", "evaluation worker threads", "1", Kind::integer},
      {"quiet", "suppress per-epoch progress", "0", Kind::flag},
  };
}

/// Values from defaults, then the config file, then flags.
class Settings {
 public:
  Settings(CLI::App* app, std::vector<Setting> defs) : defs_(std::move(defs)) {
    for (const auto& s : defs_) {
      if (s.kind == Kind::flag) {
        // No default_str here: CLI11 would feed it back as the value of a bare flag.
        auto* opt = app->add_option("--" + s.key, raw_[s.key], s.help + " [" + s.fallback + "]");
        opt->expected(0, 1)->type_name("0|1");
        opts_[s.key] = opt;
        continue;
      }
      auto* opt = app->add_option("--" + s.key, raw_[s.key], s.help);
      if (!s.fallback.empty()) {
        std::string shown = s.fallback;
        if (s.kind == Kind::real) {
          std::ostringstream os;
          os << std::stod(s.fallback);  // stored text is %.17g, show the short form
          shown = os.str();
        }
        opt->default_str(shown);
      }
      opts_[s.key] = opt;
    }
    app->add_option("--config", config_path_, "flat key=value file; flags override it");
  }

  void resolve() {
    for (const auto& s : defs_) values_[s.key] = s.fallback;
    if (!config_path_.empty()) {
      std::ifstream in(config_path_);
      if (!in) throw DataError("cannot open config file " + config_path_);
      std::string line;
      std::size_t n = 0;
      while (std::getline(in, line)) {
        ++n;
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(config_path_ + ":" + std::to_string(n) + ": expected key=value");
        auto trim = [](std::string x) {
          x.erase(0, x.find_first_not_of(" \t"));
          x.erase(x.find_last_not_of(" \t\r") + 1);
          return x;
        };
        const auto key = trim(line.substr(0, eq));
        if (!values_.count(key)) throw ConfigError(config_path_ + ":" + std::to_string(n) + ": unknown key '" + key + "'");
        values_[key] = trim(line.substr(eq + 1));
      }
    }
    for (const auto& s : defs_)
      if (opts_[s.key]->count() > 0) {
        values_[s.key] = (s.kind == Kind::flag && raw_[s.key].empty()) ? "1" : raw_[s.key];
      }
    for (const auto& s : defs_) check(s);
  }

  const std::string& get(const std::string& key) const { return values_.at(key); }
  bool given(const std::string& key) const { return opts_.at(key)->count() > 0; }

  long long integer(const std::string& key) const { return parse_int(key, get(key)); }
  double real(const std::string& key) const { return parse_real(key, get(key)); }
  bool flag(const std::string& key) const { return get(key) == "1" || get(key) == "true"; }

  std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> out;
    std::stringstream ss(get(key));
    for (std::string item; std::getline(ss, item, ',');)
      if (!item.empty()) out.push_back(item);
    return out;
  }

  ModelConfig model() const {
    ModelConfig c;
    for (const auto& s : defs_)
      if (s.model) c.set(s.key, get(s.key));
    c.validate();
    return c;
  }

  /// Resolved settings, one key=value per line in declaration order.
  std::string text() const {
    std::ostringstream os;
    for (const auto& s : defs_)
      if (s.key != "quiet" && s.key != "threads" && s.key != "out") os << s.key << '=' << get(s.key) << '\n';
    return os.str();
  }

  static long long parse_int(const std::string& key, const std::string& v) {
    try {
      std::size_t pos = 0;
      const auto x = std::stoll(v, &pos);
      if (pos == v.size() && x >= 0) return x;
    } catch (const std::exception&) {
    }
    throw ConfigError("--" + key + " expects a non-negative integer, got '" + v + "'");
  }

  static double parse_real(const std::string& key, const std::string& v) {
    try {
      std::size_t pos = 0;
      const auto x = std::stod(v, &pos);
      if (pos == v.size()) return x;
    } catch (const std::exception&) {
    }
    throw ConfigError("--" + key + " expects a number, got '" + v + "'");
  }

 private:
  void check(const Setting& s) const {
    const auto& v = values_.at(s.key);
    if (v.empty()) return;
    switch (s.kind) {
      case Kind::integer: parse_int(s.key, v); break;
      case Kind::real: parse_real(s.key, v); break;
      case Kind::flag:
        if (v != "0" && v != "1" && v != "true" && v != "false")
          throw ConfigError("--" + s.key + " expects 0 or 1, got '" + v + "'");
        break;
      default: break;
    }
  }

  std::vector<Setting> defs_;
  std::map<std::string, std::string> raw_;
  std::map<std::string, CLI::Option*> opts_;
  std::map<std::string, std::string> values_;
  std::string config_path_;
};

std::vector<std::size_t> cutoffs(const Settings& s) {
  std::vector<std::size_t> ns;
  for (const auto& x : s.list("N")) {
    const auto n = Settings::parse_int("N", x);
    if (n == 0) throw ConfigError("--N cutoffs must be positive");
    ns.push_back(static_cast<std::size_t>(n));
  }
  if (ns.empty()) throw ConfigError("--N needs at least one cutoff");
  return ns;
}

TrainOptions train_options(const Settings& s) {
  TrainOptions o;
  o.max_epochs = static_cast<std::size_t>(s.integer("epochs"));
  o.patience = static_cast<std::size_t>(s.integer("patience"));
  o.seed = static_cast<std::uint64_t>(s.integer("seed"));
  o.ns = cutoffs(s);
  o.early_stop_n = std::find(o.ns.begin(), o.ns.end(), 20) != o.ns.end() ? 20 : o.ns.front();
  o.mask_valid_in_test = s.flag("mask-valid");
  o.track_test = s.flag("track-test");
  o.threads = std::max<long long>(1, s.integer("threads"));
  return o;
}

std::uint64_t split_seed(const Settings& s) {
  return static_cast<std::uint64_t>(s.get("split-seed").empty() ? s.integer("seed") : s.integer("split-seed"));
}

DatasetBundle load_data(const Settings& s, bool need_social) {
  if (s.get("data").empty()) throw ConfigError("--data is required");
  return load_dataset_dir(s.get("data"), need_social);
}

fs::path out_dir(const Settings& s) {
  fs::path dir = s.get("out");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

std::ofstream open_report(const fs::path& path, const std::string& echo) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_config_echo(out, echo);
  return out;
}

std::string progress_line(const EpochRecord& r, std::size_t n) {
  std::ostringstream os;
  os << "epoch " << r.epoch << "  loss " << fmt(r.loss) << "  bpr " << fmt(r.bpr) << "  diff " << fmt(r.diffusion)
     << "  valid recall@" << n << " " << fmt(r.valid.users ? r.valid.recall_at(n) : 0.0) << "  " << std::fixed
     << std::setprecision(3) << r.seconds << "s";
  return os.str();
}

int cmd_train(const Settings& s) {
  const auto cfg = s.model();
  const auto opts = train_options(s);
  const auto bundle = load_data(s, cfg.uses_social());
  const auto data = prepare(split(bundle.interactions, SplitSpec{.seed = split_seed(s)}), bundle.social);
  const auto dir = out_dir(s);
  const auto echo = s.text();
  std::ofstream(dir / "config.txt") << echo;
  RecDiffModel<float> model(cfg, bundle.interactions.num_users, bundle.interactions.num_items, data.interaction_graph,
                            data.social_graph, opts.seed);
  std::cout << "dataset " << bundle.name << ": " << bundle.interactions.num_users << " users, "
            << bundle.interactions.num_items << " items, " << bundle.interactions.pairs.size() << " interactions, "
            << bundle.social.num_undirected() << " social ties\n";
  auto o = opts;
  const bool quiet = s.flag("quiet");
  o.on_epoch = [&](const EpochRecord& r) {
    if (!quiet) std::cout << progress_line(r, o.early_stop_n) << std::endl;
  };
  const auto r = train(model, data, o);
  {
    auto hist = open_report(dir / "history.tsv", echo);
    write_history(hist, r.history, o.ns, o.track_test);
    auto rep = open_report(dir / "report.tsv", echo);
    write_eval_report(rep, r.test);
    std::ofstream times(dir / "timings.tsv");
    times << "epoch\tseconds\n";
    for (const auto& h : r.history) times << h.epoch << '\t' << std::fixed << std::setprecision(6) << h.seconds << '\n';
  }
  save_checkpoint(make_checkpoint(model, r.best_epoch, r.rng_state, echo), dir / "model.ckpt");
  print_eval_table(std::cout, r.test);
  std::cout << "mean epoch time " << std::fixed << std::setprecision(3) << r.test.seconds_per_epoch << " s\n"
            << "wrote " << (dir / "report.tsv").string() << ", " << (dir / "model.ckpt").string() << "\n";
  return kOk;
}

int cmd_eval(const std::string& checkpoint, const Settings& s) {
  const auto ck = load_checkpoint(checkpoint);
  const auto cfg = ck.config();
  // Settings recorded at training time fill in anything not given on the command line.
  std::map<std::string, std::string> saved;
  {
    std::istringstream is(ck.run_text);
    for (std::string line; std::getline(is, line);)
      if (const auto eq = line.find('='); eq != std::string::npos) saved[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto pick = [&](const std::string& key) {
    if (s.given(key) || !saved.count(key)) return s.get(key);
    return saved[key];
  };
  const auto data_dir = pick("data");
  if (data_dir.empty()) throw ConfigError("--data is required");
  const auto bundle = load_dataset_dir(data_dir, cfg.uses_social());
  if (bundle.interactions.num_users != ck.num_users || bundle.interactions.num_items != ck.num_items)
    throw DataError("dataset has " + std::to_string(bundle.interactions.num_users) + " users and " +
                    std::to_string(bundle.interactions.num_items) + " items; checkpoint expects " +
                    std::to_string(ck.num_users) + " and " + std::to_string(ck.num_items));
  const auto seed_text = pick("split-seed").empty() ? pick("seed") : pick("split-seed");
  const auto seed = static_cast<std::uint64_t>(Settings::parse_int("split-seed", seed_text));
  const auto data = prepare(split(bundle.interactions, SplitSpec{.seed = seed}), bundle.social);
  TrainOptions o;
  {
    std::vector<std::size_t> ns;
    std::stringstream ss(pick("N"));
    for (std::string x; std::getline(ss, x, ',');)
      if (!x.empty()) ns.push_back(static_cast<std::size_t>(Settings::parse_int("N", x)));
    if (ns.empty() || std::count(ns.begin(), ns.end(), 0u)) throw ConfigError("--N needs positive cutoffs");
    o.ns = ns;
  }
  o.mask_valid_in_test = pick("mask-valid") == "1" || pick("mask-valid") == "true";
  o.threads = std::max<long long>(1, s.integer("threads"));
  RecDiffModel<float> model(cfg, ck.num_users, ck.num_items, data.interaction_graph, data.social_graph, 0);
  restore_checkpoint(model, ck);
  EvalReport rep;
  rep.epoch = ck.epoch;
  rep.variant = to_string(cfg.variant);
  rep.config_hash = hex64(config_hash(ck.config_text));
  rep.metrics = evaluate_split(model, data, true, o);
  print_eval_table(std::cout, rep);
  if (s.given("out")) {
    const auto dir = out_dir(s);
    auto out = open_report(dir / "eval.tsv", ck.config_text);
    write_eval_report(out, rep);
  }
  return kOk;
}

std::vector<double> parse_reals(const std::string& key, const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  for (std::string x; std::getline(ss, x, ',');)
    if (!x.empty()) out.push_back(Settings::parse_real(key, x));
  return out;
}

int cmd_robustness(const Settings& s, const std::string& ratios_text, const std::string& variants_text,
                   const std::string& seeds_text) {
  const auto base = s.model();
  const auto ratios = parse_reals("ratios", ratios_text);
  std::vector<ModelConfig> cfgs;
  {
    std::stringstream ss(variants_text);
    for (std::string v; std::getline(ss, v, ',');) {
      auto c = base;
      c.variant = parse_variant(v);
      c.validate();
      cfgs.push_back(c);
    }
  }
  if (cfgs.empty()) throw ConfigError("--variants needs at least one variant");
  std::vector<std::uint64_t> seeds;
  for (double x : parse_reals("seeds", seeds_text)) seeds.push_back(static_cast<std::uint64_t>(x));
  if (seeds.empty()) throw ConfigError("--seeds needs at least one seed");
  const bool need_social = std::any_of(cfgs.begin(), cfgs.end(), [](const auto& c) { return c.uses_social(); });
  const auto bundle = load_data(s, need_social);
  const auto data = split(bundle.interactions, SplitSpec{.seed = split_seed(s)});
  auto o = train_options(s);
  const auto res = robustness_experiment<float>(cfgs, data, bundle.social, ratios, seeds, o);
  const auto dir = out_dir(s);
  const auto echo = s.text() + "ratios=" + ratios_text + "\nvariants=" + variants_text + "\nseeds=" + seeds_text + "\n";
  auto out = open_report(dir / "robustness.tsv", echo);
  out << "variant\tratio\tseed";
  write_metric_header(out, o.ns);
  out << '\n';
  for (const auto& r : res.rows) {
    out << r.variant << '\t' << fmt(r.ratio) << '\t' << r.seed;
    write_metric_fields(out, r.metrics);
    out << '\n';
  }
  // Variants as rows, ratios as columns: median NDCG@20 and its relative drop.
  std::ostringstream table;
  table << std::left << std::setw(10) << "variant";
  for (double r : ratios) table << std::setw(24) << ("ratio " + fmt(r).substr(0, 4));
  table << '\n';
  for (const auto& c : cfgs) {
    table << std::left << std::setw(10) << to_string(c.variant);
    for (double r : ratios)
      for (const auto& m : res.summary)
        if (m.variant == to_string(c.variant) && m.ratio == r)
          table << std::setw(24) << (fmt(m.median_ndcg) + " (" + fmt(-100 * m.median_relative_drop).substr(0, 6) + "%)");
    table << '\n';
  }
  std::cout << "median NDCG@20 (change vs ratio 0)\n" << table.str();
  std::ofstream(dir / "robustness_table.txt") << table.str();
  return kOk;
}

int cmd_sweep(const Settings& s, const std::map<std::string, std::string>& axes) {
  const auto base = s.model();
  SweepGrid g;
  for (const auto& [key, text] : axes) {
    if (text.empty()) continue;
    const auto values = parse_reals(key, text);
    for (double v : values) {
      if (key == "d") g.dims.push_back(static_cast<std::size_t>(v));
      if (key == "T") g.steps.push_back(static_cast<std::size_t>(v));
      if (key == "tau") g.taus.push_back(v);
      if (key == "lambda1") g.lambda1s.push_back(v);
    }
  }
  const auto cfgs = expand_grid(base, g);
  for (const auto& c : cfgs) c.validate();
  const auto bundle = load_data(s, base.uses_social());
  const auto data = prepare(split(bundle.interactions, SplitSpec{.seed = split_seed(s)}), bundle.social);
  auto o = train_options(s);
  const auto dir = out_dir(s);
  std::string echo = s.text();
  for (const auto& [key, text] : axes) echo += "sweep-" + key + "=" + text + "\n";
  auto out = open_report(dir / "sweep.tsv", echo);
  out << "d\tT\ttau\tlambda1\tepoch\tconfig_hash";
  write_metric_header(out, o.ns);
  out << '\n';
  std::cout << std::left << std::setw(6) << "d" << std::setw(6) << "T" << std::setw(10) << "tau" << std::setw(10)
            << "lambda1" << std::setw(12) << "recall@20" << "ndcg@20\n";
  for (const auto& c : cfgs) {
    const auto r = run_once<float>(c, data, o.seed, o).test;
    out << c.dim << '\t' << c.steps << '\t' << c.tau << '\t' << c.lambda1 << '\t' << r.epoch << '\t' << r.config_hash;
    write_metric_fields(out, r.metrics);
    out << std::endl;
    const std::size_t n = std::find(o.ns.begin(), o.ns.end(), 20) != o.ns.end() ? 20 : o.ns.front();
    std::cout << std::left << std::setw(6) << c.dim << std::setw(6) << c.steps << std::setw(10) << c.tau
              << std::setw(10) << c.lambda1 << std::setw(12) << fmt(r.metrics.recall_at(n)) << fmt(r.metrics.ndcg_at(n))
              << std::endl;
  }
  return kOk;
}

int cmd_synth(const SynthOptions& o, const std::string& out) {
  const auto b = generate_synthetic(o);
  save_edge_lists(b, out);
  std::cout << b.provenance << "\n"
            << "wrote " << b.interactions.pairs.size() << " interactions and " << b.social.num_undirected()
            << " social ties to " << out << "\n";
  return kOk;
}

/// "--variant -D" would otherwise read -D as an unknown flag.
std::vector<std::string> glue_dash_values(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if ((args[i] == "--variant" || args[i] == "--variants") && i + 1 < args.size() && args[i + 1].size() > 1 &&
        args[i + 1][0] == '-' && !(args[i + 1].size() > 1 && std::isdigit(static_cast<unsigned char>(args[i + 1][1])))) {
      out.push_back(args[i] + "=" + args[i + 1]);
      ++i;
    } else {
      out.push_back(args[i]);
    }
  }
  std::reverse(out.begin(), out.end());  // CLI11 takes arguments in reverse order
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Social recommendation with diffusion-based denoising of social embeddings", "recdiff"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");

  auto with_model = [](std::vector<Setting> extra) {
    auto all = model_settings();
    all.insert(all.end(), extra.begin(), extra.end());
    return all;
  };

  auto* train = app.add_subcommand("train", "train one model and write report, history and checkpoint");
  Settings train_s(train, with_model(training_settings()));

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  std::string checkpoint;
  eval->add_option("--checkpoint", checkpoint, "checkpoint written by train")->required();
  auto eval_defs = training_settings();
  eval_defs.erase(std::remove_if(eval_defs.begin(), eval_defs.end(),
                                 [](const Setting& s) {
                                   return s.key == "epochs" || s.key == "patience" || s.key == "track-test" ||
                                          s.key == "quiet";
                                 }),
                  eval_defs.end());
  for (auto& d : eval_defs)
    if (d.key == "out") d.fallback = "";
  Settings eval_s(eval, eval_defs);

  auto* robust = app.add_subcommand("robustness", "replace social ties with fake ones and retrain each variant");
  Settings robust_s(robust, with_model(training_settings()));
  std::string ratios = "0,0.2,0.5", variants = "full,-D", seeds = "1";
  robust->add_option("--ratios", ratios, "comma-separated fake-tie ratios, must include 0")->capture_default_str();
  robust->add_option("--variants", variants, "comma-separated variants")->capture_default_str();
  robust->add_option("--seeds", seeds, "comma-separated seeds; medians are reported")->capture_default_str();

  auto* sweep_cmd = app.add_subcommand("sweep", "train one model per grid point");
  auto sweep_defs = with_model(training_settings());
  std::map<std::string, std::string> axes = {{"d", ""}, {"T", ""}, {"tau", ""}, {"lambda1", ""}};
  sweep_defs.erase(std::remove_if(sweep_defs.begin(), sweep_defs.end(),
                                  [&](const Setting& s) { return axes.count(s.key) > 0; }),
                   sweep_defs.end());
  Settings sweep_s(sweep_cmd, sweep_defs);
  for (auto& [key, text] : axes)
    sweep_cmd->add_option("--" + key, axes[key], "comma-separated grid values for " + key + " (default: single base value)");

  auto* synth = app.add_subcommand("synth", "write a planted-community dataset");
  SynthOptions so;
  std::string synth_out = "synthetic";
  synth->add_option("--users", so.num_users, "number of users")->capture_default_str();
  synth->add_option("--items", so.num_items, "number of items")->capture_default_str();
  synth->add_option("--K", so.communities, "number of communities")->capture_default_str();
  synth->add_option("--intra-p", so.intra_p, "tie probability inside a community")->capture_default_str();
  synth->add_option("--inter-p", so.inter_p, "tie probability across communities")->capture_default_str();
  synth->add_option("--pool", so.items_per_community, "items in each community pool")->capture_default_str();
  synth->add_option("--per-user", so.interactions_per_user, "interactions per user")->capture_default_str();
  synth->add_option("--noise-item-rate", so.noise_item_rate, "share of interactions drawn from all items")
      ->capture_default_str();
  synth->add_option("--seed", so.seed, "generator seed")->capture_default_str();
  synth->add_option("--out", synth_out, "output directory")->capture_default_str();

  try {
    auto args = glue_dash_values(argc, argv);
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (*train) {
      train_s.resolve();
      return cmd_train(train_s);
    }
    if (*eval) {
      eval_s.resolve();
      return cmd_eval(checkpoint, eval_s);
    }
    if (*robust) {
      robust_s.resolve();
      return cmd_robustness(robust_s, ratios, variants, seeds);
    }
    if (*sweep_cmd) {
      sweep_s.resolve();
      return cmd_sweep(sweep_s, axes);
    }
    if (*synth) return cmd_synth(so, synth_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return kDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  }
  return kConfig;
}
