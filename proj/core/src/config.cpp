#include "kgt/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "kgt/errors.hpp"

namespace kgt {

std::string to_string(TuneMode m) {
  switch (m) {
    case TuneMode::Frozen: return "frozen";
    case TuneMode::Finetune: return "finetune";
    case TuneMode::Scratch: return "scratch";
  }
  return "frozen";
}

std::string to_string(TaskName t) {
  switch (t) {
    case TaskName::Pretrain: return "pretrain";
    case TaskName::TC: return "tc";
    case TaskName::ZSL: return "zsl";
    case TaskName::QA: return "qa";
  }
  return "pretrain";
}

TuneMode tune_mode_from_string(const std::string& s) {
  if (s == "frozen") return TuneMode::Frozen;
  if (s == "finetune") return TuneMode::Finetune;
  if (s == "scratch") return TuneMode::Scratch;
  throw ConfigError("unknown tune mode: " + s);
}

TaskName task_from_string(const std::string& s) {
  if (s == "pretrain") return TaskName::Pretrain;
  if (s == "tc") return TaskName::TC;
  if (s == "zsl") return TaskName::ZSL;
  if (s == "qa") return TaskName::QA;
  throw ConfigError("unknown task: " + s);
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

uint64_t parse_u64(const std::string& key, const std::string& v) {
  uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    throw ConfigError("bad integer for " + key + ": '" + v + "'");
  }
  return out;
}

int64_t parse_i64(const std::string& key, const std::string& v) {
  int64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    throw ConfigError("bad integer for " + key + ": '" + v + "'");
  }
  return out;
}

double parse_f64(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("bad number for " + key + ": '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("bad boolean for " + key + ": '" + v + "'");
}

const std::vector<Field>& fields() {
  auto size_field = [](const char* sec, const char* key,
                       size_t RunConfig::* member) {
    return Field{
        sec, key,
        [member](const RunConfig& c) { return std::to_string(c.*member); },
        [member, key = std::string(key)](RunConfig& c, const std::string& v) {
          c.*member = static_cast<size_t>(parse_u64(key, v));
        }};
  };
  auto f64_field = [](const char* sec, const char* key,
                      double RunConfig::* member) {
    return Field{
        sec, key,
        [member](const RunConfig& c) { return fmt_double(c.*member); },
        [member, key = std::string(key)](RunConfig& c, const std::string& v) {
          c.*member = parse_f64(key, v);
        }};
  };
  auto bool_field = [](const char* sec, const char* key,
                       bool RunConfig::* member) {
    return Field{
        sec, key,
        [member](const RunConfig& c) {
          return std::string(c.*member ? "true" : "false");
        },
        [member, key = std::string(key)](RunConfig& c, const std::string& v) {
          c.*member = parse_bool(key, v);
        }};
  };
  auto i64_field = [](const char* sec, const char* key,
                      int64_t RunConfig::* member) {
    return Field{
        sec, key,
        [member](const RunConfig& c) { return std::to_string(c.*member); },
        [member, key = std::string(key)](RunConfig& c, const std::string& v) {
          c.*member = parse_i64(key, v);
        }};
  };
  auto str_field = [](const char* sec, const char* key,
                      std::string RunConfig::* member) {
    return Field{sec, key,
                 [member](const RunConfig& c) { return c.*member; },
                 [member](RunConfig& c, const std::string& v) {
                   c.*member = v;
                 }};
  };

  static const std::vector<Field> table = {
      size_field("model", "d", &RunConfig::d),
      size_field("model", "heads", &RunConfig::heads),
      size_field("model", "layers", &RunConfig::layers),
      f64_field("model", "dropout", &RunConfig::dropout),
      size_field("sampler", "k", &RunConfig::k),
      f64_field("pretrain", "mask_rate", &RunConfig::mask_rate),
      size_field("pretrain", "mem_negatives", &RunConfig::mem_negatives),
      f64_field("pretrain", "epm_positive_prob",
                &RunConfig::epm_positive_prob),
      size_field("pretrain", "epochs", &RunConfig::epochs),
      size_field("pretrain", "batch", &RunConfig::batch),
      bool_field("pretrain", "use_mem", &RunConfig::use_mem),
      bool_field("pretrain", "use_mrm", &RunConfig::use_mrm),
      bool_field("pretrain", "use_epm", &RunConfig::use_epm),
      bool_field("pretrain", "use_matrix", &RunConfig::use_matrix),
      size_field("pretrain", "checkpoint_every", &RunConfig::checkpoint_every),
      f64_field("optim", "lr", &RunConfig::lr),
      f64_field("optim", "beta1", &RunConfig::beta1),
      f64_field("optim", "beta2", &RunConfig::beta2),
      f64_field("optim", "eps", &RunConfig::eps),
      i64_field("optim", "warmup_steps", &RunConfig::warmup_steps),
      i64_field("optim", "total_steps", &RunConfig::total_steps),
      size_field("optim", "grad_accum", &RunConfig::grad_accum),
      Field{"tune", "mode",
            [](const RunConfig& c) { return to_string(c.mode); },
            [](RunConfig& c, const std::string& v) {
              c.mode = tune_mode_from_string(v);
            }},
      size_field("tune", "continual_epochs", &RunConfig::continual_epochs),
      size_field("tune", "task_epochs", &RunConfig::task_epochs),
      size_field("tune", "task_batch", &RunConfig::task_batch),
      f64_field("tune", "task_lr", &RunConfig::task_lr),
      size_field("tune", "tc_negatives", &RunConfig::tc_negatives),
      size_field("tune", "zsl_negatives", &RunConfig::zsl_negatives),
      Field{"run", "task",
            [](const RunConfig& c) { return to_string(c.task); },
            [](RunConfig& c, const std::string& v) {
              c.task = task_from_string(v);
            }},
      Field{"run", "seed",
            [](const RunConfig& c) { return std::to_string(c.seed); },
            [](RunConfig& c, const std::string& v) {
              c.seed = parse_u64("seed", v);
            }},
      str_field("paths", "graph", &RunConfig::graph),
      str_field("paths", "train", &RunConfig::train),
      str_field("paths", "valid", &RunConfig::valid),
      str_field("paths", "test", &RunConfig::test),
      str_field("paths", "features", &RunConfig::features),
      str_field("paths", "checkpoint", &RunConfig::checkpoint),
      str_field("paths", "out_dir", &RunConfig::out_dir),
  };
  return table;
}

}  // namespace

std::string serialize_config(const RunConfig& c) {
  std::ostringstream os;
  std::string current;
  for (const Field& f : fields()) {
    if (f.section != current) {
      if (!current.empty()) os << "\n";
      os << "[" << f.section << "]\n";
      current = f.section;
    }
    os << f.key << " = " << f.get(c) << "\n";
  }
  return os.str();
}

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void set_field(RunConfig& c, const std::string& section,
               const std::string& key, const std::string& value) {
  const Field* match = nullptr;
  for (const Field& f : fields()) {
    if (f.key != key) continue;
    if (!section.empty() && f.section != section) continue;
    if (match) {
      throw ConfigError("ambiguous config key '" + key +
                        "'; qualify with a section");
    }
    match = &f;
  }
  if (!match) {
    throw ConfigError("unknown config key: " +
                      (section.empty() ? key : section + "." + key));
  }
  match->set(c, value);
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig c;
  std::istringstream is(text);
  std::string line, section;
  size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": unterminated section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value");
    }
    set_field(c, section, trim(line.substr(0, eq)),
              trim(line.substr(eq + 1)));
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void apply_override(RunConfig& c, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override must be key=value: " + assignment);
  }
  std::string key = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  std::string section;
  const size_t dot = key.find('.');
  if (dot != std::string::npos) {
    section = key.substr(0, dot);
    key = key.substr(dot + 1);
  }
  set_field(c, section, key, value);
}

void validate(const RunConfig& c) {
  std::vector<std::string> bad;
  if (c.d == 0 || c.heads == 0 || c.d % c.heads != 0) {
    bad.push_back("model.d must be a positive multiple of model.heads");
  }
  if (!(c.mask_rate > 0.0 && c.mask_rate < 1.0)) {
    bad.push_back("pretrain.mask_rate must be in (0,1)");
  }
  if (!(c.epm_positive_prob >= 0.0 && c.epm_positive_prob <= 1.0)) {
    bad.push_back("pretrain.epm_positive_prob must be in [0,1]");
  }
  if (c.k == 0) bad.push_back("sampler.k must be >= 1");
  if (c.batch == 0) bad.push_back("pretrain.batch must be >= 1");
  if (c.epochs == 0) bad.push_back("pretrain.epochs must be >= 1");
  if (c.lr <= 0.0) bad.push_back("optim.lr must be > 0");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) {
    bad.push_back("model.dropout must be in [0,1)");
  }
  if (c.grad_accum == 0) bad.push_back("optim.grad_accum must be >= 1");
  if (c.task_batch == 0) bad.push_back("tune.task_batch must be >= 1");
  if (c.warmup_steps < 0) bad.push_back("optim.warmup_steps must be >= 0");
  if (c.total_steps < 0) bad.push_back("optim.total_steps must be >= 0");
  if (c.total_steps > 0 && c.warmup_steps >= c.total_steps) {
    bad.push_back("optim.warmup_steps must be < optim.total_steps");
  }
  if (!bad.empty()) {
    std::string msg = "invalid configuration:";
    for (const std::string& b : bad) msg += "\n  - " + b;
    throw ConfigError(msg);
  }
}

std::string config_hash(const RunConfig& c) {
  const std::string s = serialize_config(c);
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace kgt
