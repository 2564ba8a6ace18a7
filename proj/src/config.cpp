#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "phifno/cli.hpp"
#include "phifno/errors.hpp"

namespace phifno::cli {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& msg) { throw ConfigError("config: " + msg); }

std::string join(const char* base, const std::string& key) {
  return base[0] == '\0' ? key : std::string(base) + "." + key;
}

void check_keys(const json& j, const char* path,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) bad("'" + std::string(path) + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) bad("unknown key '" + join(path, it.key()) + "'");
  }
}

template <typename T>
void read_key(const json& j, const char* base, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    it->get_to(out);
  } catch (const json::exception&) {
    bad("wrong type for '" + join(base, key) + "'");
  }
}

// The sampler intervals are part of the recorded data protocol, so the config
// block exists to document and validate them, not to change them: lo must be
// below hi, and any value differing from the pinned table is rejected loudly
// instead of silently drifting the distribution.
struct PinnedRange {
  const char* name;
  double lo, hi;
};

const PinnedRange kEllipseRanges[] = {
    {"x0", 0.2, 0.8},        {"y0", 0.2, 0.8},      {"lx", 0.2, 0.45},
    {"ly", 0.2, 0.45},       {"theta", 0.0, M_PI},  {"amplitude", 20.0, 30.0},
    {"mu0", 0.2, 0.8},       {"mu1", 0.2, 0.8},     {"sigma_x", 0.15, 0.45},
    {"sigma_y", 0.15, 0.45}, {"alpha", -0.8, 0.8},  {"beta", -0.8, 0.8},
};

const PinnedRange kGaussianRanges[] = {
    {"centers", 0.25, 0.75}, {"widths", 0.01, 0.04}, {"amplitude", 20.0, 30.0},
    {"mu0", 0.2, 0.8},       {"mu1", 0.2, 0.8},      {"sigma_x", 0.15, 0.45},
    {"sigma_y", 0.15, 0.45}, {"alpha", -0.8, 0.8},   {"beta", -0.8, 0.8},
};

void parse_ranges(const json& j, const std::string& generator) {
  const PinnedRange* table = kEllipseRanges;
  size_t count = sizeof(kEllipseRanges) / sizeof(kEllipseRanges[0]);
  if (generator == "gaussian_shapes") {
    table = kGaussianRanges;
    count = sizeof(kGaussianRanges) / sizeof(kGaussianRanges[0]);
  }
  if (!j.is_object()) bad("'generate.ranges' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const PinnedRange* pin = nullptr;
    for (size_t k = 0; k < count; ++k)
      if (it.key() == table[k].name) pin = &table[k];
    if (!pin) bad("unknown key 'generate.ranges." + it.key() + "'");
    std::vector<double> r;
    try {
      it->get_to(r);
    } catch (const json::exception&) {
      bad("wrong type for 'generate.ranges." + it.key() + "'");
    }
    if (r.size() != 2) bad("'generate.ranges." + it.key() + "' must be [lo, hi]");
    if (!(r[0] < r[1])) bad("'generate.ranges." + it.key() + "': lo must be < hi");
    if (r[0] != pin->lo || r[1] != pin->hi)
      bad("'generate.ranges." + it.key() +
          "' is pinned by the data protocol and cannot be changed");
  }
}

json ranges_snapshot(const std::string& generator) {
  const PinnedRange* table = kEllipseRanges;
  size_t count = sizeof(kEllipseRanges) / sizeof(kEllipseRanges[0]);
  if (generator == "gaussian_shapes") {
    table = kGaussianRanges;
    count = sizeof(kGaussianRanges) / sizeof(kGaussianRanges[0]);
  }
  json r;
  for (size_t k = 0; k < count; ++k) r[table[k].name] = {table[k].lo, table[k].hi};
  return r;
}

void parse_generate(const json& j, RunConfig& cfg) {
  check_keys(j, "generate", {"generator", "n_samples", "margin", "threads", "ranges"});
  read_key(j, "generate", "generator", cfg.generate.generator);
  read_key(j, "generate", "n_samples", cfg.generate.n_samples);
  read_key(j, "generate", "margin", cfg.generate.margin);
  read_key(j, "generate", "threads", cfg.generate.threads);
  if (cfg.generate.generator != "ellipse" && cfg.generate.generator != "gaussian_shapes")
    bad("'generate.generator' must be \"ellipse\" or \"gaussian_shapes\"");
  if (auto it = j.find("ranges"); it != j.end()) parse_ranges(*it, cfg.generate.generator);
}

void parse_split(const json& j, RunConfig& cfg) {
  check_keys(j, "split", {"train", "val", "test"});
  read_key(j, "split", "train", cfg.split.train);
  read_key(j, "split", "val", cfg.split.val);
  read_key(j, "split", "test", cfg.split.test);
}

void parse_fno(const json& j, RunConfig& cfg) {
  check_keys(j, "fno", {"n_d", "m", "n_q", "pad", "pad_per_layer", "predict_u"});
  read_key(j, "fno", "n_d", cfg.fno.n_d);
  read_key(j, "fno", "m", cfg.fno.m);
  read_key(j, "fno", "n_q", cfg.fno.n_q);
  read_key(j, "fno", "pad", cfg.fno.pad);
  read_key(j, "fno", "pad_per_layer", cfg.fno.pad_per_layer);
  read_key(j, "fno", "predict_u", cfg.fno.predict_u);
}

void parse_scheduler(const json& j, RunConfig& cfg) {
  check_keys(j, "train.scheduler", {"factor", "patience", "min_lr"});
  read_key(j, "train.scheduler", "factor", cfg.train.scheduler.factor);
  read_key(j, "train.scheduler", "patience", cfg.train.scheduler.patience);
  read_key(j, "train.scheduler", "min_lr", cfg.train.scheduler.min_lr);
}

void parse_train(const json& j, RunConfig& cfg) {
  check_keys(j, "train",
             {"dataset", "epochs", "batch_size", "lr", "beta1", "beta2", "eps",
              "l2_lambda", "weight_decay", "loss", "scheduler", "checkpoint_every",
              "resume"});
  read_key(j, "train", "dataset", cfg.train.dataset);
  read_key(j, "train", "epochs", cfg.train.epochs);
  read_key(j, "train", "batch_size", cfg.train.batch_size);
  read_key(j, "train", "lr", cfg.train.lr);
  read_key(j, "train", "beta1", cfg.train.beta1);
  read_key(j, "train", "beta2", cfg.train.beta2);
  read_key(j, "train", "eps", cfg.train.eps);
  read_key(j, "train", "l2_lambda", cfg.train.l2_lambda);
  read_key(j, "train", "weight_decay", cfg.train.weight_decay);
  read_key(j, "train", "loss", cfg.train.loss);
  read_key(j, "train", "checkpoint_every", cfg.train.checkpoint_every);
  read_key(j, "train", "resume", cfg.train.resume);
  if (cfg.train.loss != "full_h1" && cfg.train.loss != "semi_h1")
    bad("'train.loss' must be \"full_h1\" or \"semi_h1\"");
  if (cfg.train.checkpoint_every < 0) bad("'train.checkpoint_every' must be >= 0");
  if (auto it = j.find("scheduler"); it != j.end()) parse_scheduler(*it, cfg);
}

void parse_evaluate(const json& j, RunConfig& cfg) {
  check_keys(j, "evaluate", {"dataset", "checkpoint", "checkpoints", "hausdorff_against"});
  read_key(j, "evaluate", "dataset", cfg.evaluate.dataset);
  read_key(j, "evaluate", "checkpoint", cfg.evaluate.checkpoint);
  read_key(j, "evaluate", "checkpoints", cfg.evaluate.checkpoints);
  read_key(j, "evaluate", "hausdorff_against", cfg.evaluate.hausdorff_against);
}

void parse_convergence(const json& j, RunConfig& cfg) {
  check_keys(j, "convergence", {"case", "domain", "resolutions"});
  read_key(j, "convergence", "case", cfg.convergence.case_id);
  read_key(j, "convergence", "domain", cfg.convergence.domain);
  read_key(j, "convergence", "resolutions", cfg.convergence.resolutions);
  if (cfg.convergence.case_id != "sine" && cfg.convergence.case_id != "quadratic" &&
      cfg.convergence.case_id != "affine")
    bad("'convergence.case' must be \"sine\", \"quadratic\" or \"affine\"");
  if (cfg.convergence.domain != "disk" && cfg.convergence.domain != "ellipse")
    bad("'convergence.domain' must be \"disk\" or \"ellipse\"");
}

void parse_predict(const json& j, RunConfig& cfg) {
  check_keys(j, "predict", {"checkpoint", "dataset", "index", "f", "phi", "g"});
  read_key(j, "predict", "checkpoint", cfg.predict.checkpoint);
  read_key(j, "predict", "dataset", cfg.predict.dataset);
  read_key(j, "predict", "index", cfg.predict.index);
  read_key(j, "predict", "f", cfg.predict.f);
  read_key(j, "predict", "phi", cfg.predict.phi);
  read_key(j, "predict", "g", cfg.predict.g);
}

void parse_root(const json& j, RunConfig& cfg) {
  check_keys(j, "",
             {"seed", "sigma_d", "grid", "out", "deterministic", "generate", "split",
              "fno", "train", "evaluate", "convergence", "predict"});
  read_key(j, "", "seed", cfg.seed);
  read_key(j, "", "sigma_d", cfg.sigma_d);
  read_key(j, "", "out", cfg.out);
  read_key(j, "", "deterministic", cfg.deterministic);
  if (auto it = j.find("grid"); it != j.end()) {
    check_keys(*it, "grid", {"nx", "ny"});
    read_key(*it, "grid", "nx", cfg.nx);
    read_key(*it, "grid", "ny", cfg.ny);
    if (cfg.nx < 2 || cfg.ny < 2) bad("'grid.nx' and 'grid.ny' must be >= 2");
  }
  if (auto it = j.find("generate"); it != j.end()) parse_generate(*it, cfg);
  if (auto it = j.find("split"); it != j.end()) parse_split(*it, cfg);
  if (auto it = j.find("fno"); it != j.end()) parse_fno(*it, cfg);
  if (auto it = j.find("train"); it != j.end()) parse_train(*it, cfg);
  if (auto it = j.find("evaluate"); it != j.end()) parse_evaluate(*it, cfg);
  if (auto it = j.find("convergence"); it != j.end()) parse_convergence(*it, cfg);
  if (auto it = j.find("predict"); it != j.end()) parse_predict(*it, cfg);
}

}  // namespace

RunConfig load_config(const std::string& path) {
  RunConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config: " + path + " is not valid JSON: " + e.what());
  }
  parse_root(j, cfg);
  return cfg;
}

std::string config_snapshot(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["sigma_d"] = cfg.sigma_d;
  j["grid"] = {{"nx", cfg.nx}, {"ny", cfg.ny}};
  j["out"] = cfg.out;
  j["deterministic"] = cfg.deterministic;
  j["generate"] = {{"generator", cfg.generate.generator},
                   {"n_samples", cfg.generate.n_samples},
                   {"margin", cfg.generate.margin},
                   {"threads", cfg.generate.threads},
                   {"ranges", ranges_snapshot(cfg.generate.generator)}};
  j["split"] = {{"train", cfg.split.train}, {"val", cfg.split.val}, {"test", cfg.split.test}};
  j["fno"] = {{"n_d", cfg.fno.n_d},
              {"m", cfg.fno.m},
              {"n_q", cfg.fno.n_q},
              {"pad", cfg.fno.pad},
              {"pad_per_layer", cfg.fno.pad_per_layer},
              {"predict_u", cfg.fno.predict_u}};
  j["train"] = {{"dataset", cfg.train.dataset},
                {"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"lr", cfg.train.lr},
                {"beta1", cfg.train.beta1},
                {"beta2", cfg.train.beta2},
                {"eps", cfg.train.eps},
                {"l2_lambda", cfg.train.l2_lambda},
                {"weight_decay", cfg.train.weight_decay},
                {"loss", cfg.train.loss},
                {"scheduler",
                 {{"factor", cfg.train.scheduler.factor},
                  {"patience", cfg.train.scheduler.patience},
                  {"min_lr", cfg.train.scheduler.min_lr}}},
                {"checkpoint_every", cfg.train.checkpoint_every},
                {"resume", cfg.train.resume}};
  j["evaluate"] = {{"dataset", cfg.evaluate.dataset},
                   {"checkpoint", cfg.evaluate.checkpoint},
                   {"checkpoints", cfg.evaluate.checkpoints},
                   {"hausdorff_against", cfg.evaluate.hausdorff_against}};
  j["convergence"] = {{"case", cfg.convergence.case_id},
                      {"domain", cfg.convergence.domain},
                      {"resolutions", cfg.convergence.resolutions}};
  j["predict"] = {{"checkpoint", cfg.predict.checkpoint},
                  {"dataset", cfg.predict.dataset},
                  {"index", cfg.predict.index},
                  {"f", cfg.predict.f},
                  {"phi", cfg.predict.phi},
                  {"g", cfg.predict.g}};
  return j.dump(2) + "\n";
}

}  // namespace phifno::cli
