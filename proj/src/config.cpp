#include "kgt/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace kgt {
namespace {

using nlohmann::json;

struct Errors {
  std::vector<std::string> list;
  void add(const std::string& path, const std::string& what) {
    list.push_back(path + ": " + what);
  }
};

void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed,
                Errors& errs) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.contains(it.key())) errs.add(path + "." + it.key(), "unknown key");
}

bool want(const json& j, const char* key) { return j.contains(key) && !j.at(key).is_null(); }

template <typename T>
void read_number(const json& j, const char* key, const std::string& path, T& out, Errors& errs) {
  if (!want(j, key)) return;
  const json& v = j.at(key);
  if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) {
      errs.add(path + "." + key, "expected a number");
      return;
    }
  } else {
    if (!v.is_number_integer() && !v.is_number_unsigned()) {
      errs.add(path + "." + key, "expected an integer");
      return;
    }
  }
  out = v.get<T>();
}

void read_string(const json& j, const char* key, const std::string& path, std::string& out,
                 Errors& errs) {
  if (!want(j, key)) return;
  if (!j.at(key).is_string()) {
    errs.add(path + "." + key, "expected a string");
    return;
  }
  out = j.at(key).get<std::string>();
}

void read_bool(const json& j, const char* key, const std::string& path, bool& out, Errors& errs) {
  if (!want(j, key)) return;
  if (!j.at(key).is_boolean()) {
    errs.add(path + "." + key, "expected a boolean");
    return;
  }
  out = j.at(key).get<bool>();
}

int default_threads() {
  if (const char* env = std::getenv("KGT_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v >= 1) return static_cast<int>(v);
  }
  return 1;
}

std::string fmt_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config: top-level document must be an object");

  Errors errs;
  RunConfig cfg;
  cfg.threads = default_threads();

  check_keys(doc, "config",
             {"version", "setting", "output_dir", "seed", "threads", "precision", "data",
              "encoder", "walk", "nce", "train", "pretrain", "teacher_checkpoint", "subgraph",
              "distill", "eval", "rules"},
             errs);
  read_number(doc, "version", "config", cfg.version, errs);
  if (cfg.version != 1) errs.add("config.version", "unsupported version (expected 1)");
  read_string(doc, "setting", "config", cfg.setting, errs);
  if (cfg.setting != "lp" && cfg.setting != "joint-lp" && cfg.setting != "pr4lp")
    errs.add("config.setting", "must be one of lp, joint-lp, pr4lp");
  read_string(doc, "output_dir", "config", cfg.output_dir, errs);
  if (cfg.output_dir.empty()) errs.add("config.output_dir", "required");
  read_number(doc, "seed", "config", cfg.seed, errs);
  read_number(doc, "threads", "config", cfg.threads, errs);
  if (cfg.threads < 1) errs.add("config.threads", "must be at least 1");
  {
    std::string prec = "f32";
    read_string(doc, "precision", "config", prec, errs);
    if (prec == "f32")
      cfg.precision = Precision::f32;
    else if (prec == "f64")
      cfg.precision = Precision::f64;
    else
      errs.add("config.precision", "must be f32 or f64");
  }

  if (want(doc, "data")) {
    const json& d = doc.at("data");
    if (!d.is_object()) {
      errs.add("config.data", "expected an object");
    } else {
      check_keys(d, "config.data", {"target", "backgrounds", "alignments"}, errs);
      if (want(d, "target")) {
        const json& t = d.at("target");
        if (!t.is_object()) {
          errs.add("config.data.target", "expected an object");
        } else {
          check_keys(t, "config.data.target", {"name", "train", "valid", "test"}, errs);
          read_string(t, "name", "config.data.target", cfg.target_name, errs);
          read_string(t, "train", "config.data.target", cfg.target_train, errs);
          read_string(t, "valid", "config.data.target", cfg.target_valid, errs);
          read_string(t, "test", "config.data.target", cfg.target_test, errs);
        }
      }
      if (want(d, "backgrounds")) {
        const json& bs = d.at("backgrounds");
        if (!bs.is_array()) {
          errs.add("config.data.backgrounds", "expected an array");
        } else {
          for (std::size_t i = 0; i < bs.size(); ++i) {
            std::string p = "config.data.backgrounds[" + std::to_string(i) + "]";
            const json& b = bs[i];
            if (!b.is_object()) {
              errs.add(p, "expected an object");
              continue;
            }
            check_keys(b, p, {"name", "triplets"}, errs);
            RunConfig::BackgroundConfig bc;
            read_string(b, "name", p, bc.name, errs);
            read_string(b, "triplets", p, bc.triplets, errs);
            if (bc.name.empty()) errs.add(p + ".name", "required");
            if (bc.triplets.empty()) errs.add(p + ".triplets", "required");
            cfg.backgrounds.push_back(std::move(bc));
          }
        }
      }
      if (want(d, "alignments")) {
        const json& as = d.at("alignments");
        if (!as.is_array()) {
          errs.add("config.data.alignments", "expected an array");
        } else {
          for (std::size_t i = 0; i < as.size(); ++i) {
            std::string p = "config.data.alignments[" + std::to_string(i) + "]";
            const json& a = as[i];
            if (!a.is_object()) {
              errs.add(p, "expected an object");
              continue;
            }
            check_keys(a, p, {"left", "right", "pairs", "relation_map"}, errs);
            RunConfig::AlignmentConfig ac;
            read_string(a, "left", p, ac.left, errs);
            read_string(a, "right", p, ac.right, errs);
            read_string(a, "pairs", p, ac.pairs, errs);
            read_string(a, "relation_map", p, ac.relation_map, errs);
            if (ac.left.empty()) errs.add(p + ".left", "required");
            if (ac.right.empty()) errs.add(p + ".right", "required");
            if (ac.pairs.empty()) errs.add(p + ".pairs", "required");
            cfg.alignments.push_back(std::move(ac));
          }
        }
      }
    }
  }

  if (want(doc, "encoder")) {
    const json& e = doc.at("encoder");
    if (!e.is_object()) {
      errs.add("config.encoder", "expected an object");
    } else {
      check_keys(e, "config.encoder",
                 {"kind", "dim", "layers", "heads", "dropout", "max_path_length"}, errs);
      std::string kind = to_string(cfg.encoder.kind);
      read_string(e, "kind", "config.encoder", kind, errs);
      try {
        cfg.encoder.kind = encoder_kind_from_string(kind);
      } catch (const ConfigError&) {
        errs.add("config.encoder.kind", "must be one of lstm, rsn, transformer");
      }
      read_number(e, "dim", "config.encoder", cfg.encoder.dim, errs);
      read_number(e, "layers", "config.encoder", cfg.encoder.layers, errs);
      read_number(e, "heads", "config.encoder", cfg.encoder.heads, errs);
      read_number(e, "dropout", "config.encoder", cfg.encoder.dropout_rate, errs);
      read_number(e, "max_path_length", "config.encoder", cfg.encoder.max_path_length, errs);
    }
  }
  cfg.encoder.precision = cfg.precision;

  if (want(doc, "walk")) {
    const json& w = doc.at("walk");
    if (!w.is_object()) {
      errs.add("config.walk", "expected an object");
    } else {
      check_keys(w, "config.walk", {"path_length", "walks_per_start", "weighting"}, errs);
      read_number(w, "path_length", "config.walk", cfg.walk.path_length, errs);
      read_number(w, "walks_per_start", "config.walk", cfg.walk.walks_per_start, errs);
      std::string weighting = "uniform";
      if (cfg.walk.weighting == NeighborWeighting::inverse_frequency)
        weighting = "inverse-frequency";
      read_string(w, "weighting", "config.walk", weighting, errs);
      if (weighting == "uniform")
        cfg.walk.weighting = NeighborWeighting::uniform;
      else if (weighting == "inverse-frequency")
        cfg.walk.weighting = NeighborWeighting::inverse_frequency;
      else
        errs.add("config.walk.weighting", "must be uniform or inverse-frequency");
    }
  }

  if (want(doc, "nce")) {
    const json& n = doc.at("nce");
    if (!n.is_object()) {
      errs.add("config.nce", "expected an object");
    } else {
      check_keys(n, "config.nce", {"k", "printed_form"}, errs);
      read_number(n, "k", "config.nce", cfg.nce.k, errs);
      read_bool(n, "printed_form", "config.nce", cfg.nce.printed_form, errs);
    }
  }

  if (want(doc, "train")) {
    const json& t = doc.at("train");
    if (!t.is_object()) {
      errs.add("config.train", "expected an object");
    } else {
      check_keys(t, "config.train",
                 {"batch_size", "epochs", "learning_rate", "beta1", "beta2", "eps",
                  "resample_every", "augment_cap_multiplier"},
                 errs);
      read_number(t, "batch_size", "config.train", cfg.train.batch_size, errs);
      read_number(t, "epochs", "config.train", cfg.train.epochs, errs);
      read_number(t, "learning_rate", "config.train", cfg.train.adam.learning_rate, errs);
      read_number(t, "beta1", "config.train", cfg.train.adam.beta1, errs);
      read_number(t, "beta2", "config.train", cfg.train.adam.beta2, errs);
      read_number(t, "eps", "config.train", cfg.train.adam.eps, errs);
      read_number(t, "resample_every", "config.train", cfg.train.resample_every, errs);
      read_number(t, "augment_cap_multiplier", "config.train", cfg.train.augment_cap_multiplier,
                  errs);
    }
  }
  cfg.train.seed = cfg.seed;

  if (want(doc, "pretrain")) {
    const json& p = doc.at("pretrain");
    if (!p.is_object()) {
      errs.add("config.pretrain", "expected an object");
    } else {
      cfg.has_pretrain = true;
      check_keys(p, "config.pretrain", {"epochs"}, errs);
      read_number(p, "epochs", "config.pretrain", cfg.pretrain_epochs, errs);
    }
  }
  if (cfg.pretrain_epochs < 0) cfg.pretrain_epochs = cfg.train.epochs;

  read_string(doc, "teacher_checkpoint", "config", cfg.teacher_checkpoint, errs);

  if (want(doc, "subgraph")) {
    const json& s = doc.at("subgraph");
    if (!s.is_object()) {
      errs.add("config.subgraph", "expected an object");
    } else {
      check_keys(s, "config.subgraph", {"budget"}, errs);
      read_number(s, "budget", "config.subgraph", cfg.budget, errs);
    }
  }
  if (cfg.budget < -1) errs.add("config.subgraph.budget", "must be -1 (auto) or nonnegative");

  if (want(doc, "distill")) {
    const json& d = doc.at("distill");
    if (!d.is_object()) {
      errs.add("config.distill", "expected an object");
    } else {
      check_keys(d, "config.distill", {"alpha", "beta", "patience", "val_period"}, errs);
      read_number(d, "alpha", "config.distill", cfg.distill.alpha, errs);
      read_number(d, "beta", "config.distill", cfg.distill.beta, errs);
      read_number(d, "patience", "config.distill", cfg.distill.patience, errs);
      read_number(d, "val_period", "config.distill", cfg.distill.val_period, errs);
    }
  }

  if (want(doc, "eval")) {
    const json& e = doc.at("eval");
    if (!e.is_object()) {
      errs.add("config.eval", "expected an object");
    } else {
      check_keys(e, "config.eval", {"filter"}, errs);
      read_string(e, "filter", "config.eval", cfg.eval_filter, errs);
      if (cfg.eval_filter != "train" && cfg.eval_filter != "all")
        errs.add("config.eval.filter", "must be train or all");
    }
  }

  if (want(doc, "rules")) {
    const json& r = doc.at("rules");
    if (!r.is_object()) {
      errs.add("config.rules", "expected an object");
    } else {
      check_keys(r, "config.rules", {"max_body", "min_support", "min_confidence"}, errs);
      read_number(r, "max_body", "config.rules", cfg.rules.max_body, errs);
      read_number(r, "min_support", "config.rules", cfg.rules.min_support, errs);
      read_number(r, "min_confidence", "config.rules", cfg.rules.min_confidence, errs);
    }
  }

  // Cross-field constraints (only when field-level parsing succeeded).
  if (errs.list.empty()) {
    if (cfg.target_train.empty()) errs.add("config.data.target.train", "required");
    if (cfg.target_valid.empty()) errs.add("config.data.target.valid", "required");
    if (cfg.target_test.empty()) errs.add("config.data.target.test", "required");
    std::set<std::string> names{cfg.target_name};
    for (const auto& b : cfg.backgrounds)
      if (!names.insert(b.name).second)
        errs.add("config.data.backgrounds", "duplicate graph name '" + b.name + "'");
    for (std::size_t i = 0; i < cfg.alignments.size(); ++i) {
      std::string p = "config.data.alignments[" + std::to_string(i) + "]";
      const auto& a = cfg.alignments[i];
      if (!names.contains(a.left)) errs.add(p + ".left", "unknown graph '" + a.left + "'");
      if (!names.contains(a.right)) errs.add(p + ".right", "unknown graph '" + a.right + "'");
      if (a.left == a.right) errs.add(p, "left and right must differ");
    }
    if (cfg.setting != "lp") {
      if (cfg.backgrounds.empty())
        errs.add("config.data.backgrounds", "setting '" + cfg.setting +
                                                "' requires at least one background graph");
      if (cfg.alignments.empty())
        errs.add("config.data.alignments",
                 "setting '" + cfg.setting + "' requires at least one alignment");
    }
    if (cfg.setting == "pr4lp" && cfg.teacher_checkpoint.empty() && !cfg.has_pretrain)
      errs.add("config.teacher_checkpoint",
               "pr4lp requires a teacher checkpoint or a pretrain block");
    try {
      validate_encoder_config(cfg.encoder);
    } catch (const ConfigError& e) {
      errs.add("config.encoder", e.what());
    }
    try {
      validate_walk_config(cfg.walk);
    } catch (const ConfigError& e) {
      errs.add("config.walk", e.what());
    }
    try {
      validate_nce_config(cfg.nce);
    } catch (const ConfigError& e) {
      errs.add("config.nce", e.what());
    }
    try {
      validate_train_config(cfg.train);
    } catch (const ConfigError& e) {
      errs.add("config.train", e.what());
    }
    try {
      validate_distill_config(cfg.distill);
    } catch (const ConfigError& e) {
      errs.add("config.distill", e.what());
    }
    if (cfg.pretrain_epochs < 0) errs.add("config.pretrain.epochs", "must be nonnegative");
    if (cfg.rules.max_body != 1 && cfg.rules.max_body != 2)
      errs.add("config.rules.max_body", "must be 1 or 2");
    if (cfg.rules.min_support < 1) errs.add("config.rules.min_support", "must be positive");
    if (cfg.rules.min_confidence < 0 || cfg.rules.min_confidence > 1)
      errs.add("config.rules.min_confidence", "must lie in [0, 1]");
  }

  if (!errs.list.empty()) {
    std::string msg = "config validation failed:";
    for (const auto& e : errs.list) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path, bool check_paths) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig cfg = parse_run_config(ss.str());
  if (check_paths) {
    std::vector<std::pair<std::string, std::string>> refs = {
        {"config.data.target.train", cfg.target_train},
        {"config.data.target.valid", cfg.target_valid},
        {"config.data.target.test", cfg.target_test},
    };
    for (std::size_t i = 0; i < cfg.backgrounds.size(); ++i)
      refs.emplace_back("config.data.backgrounds[" + std::to_string(i) + "].triplets",
                        cfg.backgrounds[i].triplets);
    for (std::size_t i = 0; i < cfg.alignments.size(); ++i) {
      refs.emplace_back("config.data.alignments[" + std::to_string(i) + "].pairs",
                        cfg.alignments[i].pairs);
      if (!cfg.alignments[i].relation_map.empty())
        refs.emplace_back("config.data.alignments[" + std::to_string(i) + "].relation_map",
                          cfg.alignments[i].relation_map);
    }
    if (!cfg.teacher_checkpoint.empty())
      refs.emplace_back("config.teacher_checkpoint", cfg.teacher_checkpoint);
    std::vector<std::string> missing;
    for (const auto& [field, p] : refs)
      if (!p.empty() && !std::filesystem::exists(p))
        missing.push_back(field + ": path does not exist: " + p);
    if (!missing.empty()) {
      std::string msg = "config validation failed:";
      for (const auto& m : missing) msg += "\n  " + m;
      throw ConfigError(msg);
    }
  }
  return cfg;
}

std::string render_run_config(const RunConfig& cfg) {
  std::ostringstream out;
  out << "{\n";
  out << "  \"version\": " << cfg.version << ",\n";
  out << "  \"setting\": \"" << cfg.setting << "\",\n";
  out << "  \"output_dir\": \"" << cfg.output_dir << "\",\n";
  out << "  \"seed\": " << cfg.seed << ",\n";
  out << "  \"threads\": " << cfg.threads << ",\n";
  out << "  \"precision\": \"" << (cfg.precision == Precision::f64 ? "f64" : "f32") << "\",\n";
  out << "  \"data\": {\n";
  out << "    \"target\": {\"name\": \"" << cfg.target_name << "\", \"train\": \""
      << cfg.target_train << "\", \"valid\": \"" << cfg.target_valid << "\", \"test\": \""
      << cfg.target_test << "\"},\n";
  out << "    \"backgrounds\": [";
  for (std::size_t i = 0; i < cfg.backgrounds.size(); ++i) {
    if (i) out << ", ";
    out << "{\"name\": \"" << cfg.backgrounds[i].name << "\", \"triplets\": \""
        << cfg.backgrounds[i].triplets << "\"}";
  }
  out << "],\n";
  out << "    \"alignments\": [";
  for (std::size_t i = 0; i < cfg.alignments.size(); ++i) {
    if (i) out << ", ";
    out << "{\"left\": \"" << cfg.alignments[i].left << "\", \"right\": \""
        << cfg.alignments[i].right << "\", \"pairs\": \"" << cfg.alignments[i].pairs << "\"";
    if (!cfg.alignments[i].relation_map.empty())
      out << ", \"relation_map\": \"" << cfg.alignments[i].relation_map << "\"";
    out << "}";
  }
  out << "]\n  },\n";
  out << "  \"encoder\": {\"kind\": \"" << to_string(cfg.encoder.kind)
      << "\", \"dim\": " << cfg.encoder.dim << ", \"layers\": " << cfg.encoder.layers
      << ", \"heads\": " << cfg.encoder.heads << ", \"dropout\": "
      << fmt_double(cfg.encoder.dropout_rate)
      << ", \"max_path_length\": " << cfg.encoder.max_path_length << "},\n";
  out << "  \"walk\": {\"path_length\": " << cfg.walk.path_length
      << ", \"walks_per_start\": " << cfg.walk.walks_per_start << ", \"weighting\": \""
      << (cfg.walk.weighting == NeighborWeighting::uniform ? "uniform" : "inverse-frequency")
      << "\"},\n";
  out << "  \"nce\": {\"k\": " << cfg.nce.k << ", \"printed_form\": "
      << (cfg.nce.printed_form ? "true" : "false") << "},\n";
  out << "  \"train\": {\"batch_size\": " << cfg.train.batch_size
      << ", \"epochs\": " << cfg.train.epochs << ", \"learning_rate\": "
      << fmt_double(cfg.train.adam.learning_rate) << ", \"beta1\": "
      << fmt_double(cfg.train.adam.beta1) << ", \"beta2\": " << fmt_double(cfg.train.adam.beta2)
      << ", \"eps\": " << fmt_double(cfg.train.adam.eps)
      << ", \"resample_every\": " << cfg.train.resample_every << ", \"augment_cap_multiplier\": "
      << fmt_double(cfg.train.augment_cap_multiplier) << "},\n";
  out << "  \"pretrain\": {\"epochs\": " << cfg.pretrain_epochs << "},\n";
  out << "  \"teacher_checkpoint\": \"" << cfg.teacher_checkpoint << "\",\n";
  out << "  \"subgraph\": {\"budget\": " << cfg.budget << "},\n";
  out << "  \"distill\": {\"alpha\": " << fmt_double(cfg.distill.alpha) << ", \"beta\": "
      << fmt_double(cfg.distill.beta) << ", \"patience\": " << cfg.distill.patience
      << ", \"val_period\": " << cfg.distill.val_period << "},\n";
  out << "  \"eval\": {\"filter\": \"" << cfg.eval_filter << "\"},\n";
  out << "  \"rules\": {\"max_body\": " << cfg.rules.max_body << ", \"min_support\": "
      << cfg.rules.min_support << ", \"min_confidence\": "
      << fmt_double(cfg.rules.min_confidence) << "}\n";
  out << "}\n";
  return out.str();
}

std::string run_config_hash(const RunConfig& cfg) {
  std::string text = render_run_config(cfg);
  return to_hex(fnv1a64(text.data(), text.size()));
}

}  // namespace kgt
