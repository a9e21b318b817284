#include "came/cli/config.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <stdexcept>

#include "came/util/binary_io.hpp"

namespace came::cli {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::size_t to_size(std::string_view v) {
  std::size_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw std::invalid_argument("expected a non-negative integer");
  return out;
}

std::uint64_t to_u64(std::string_view v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw std::invalid_argument("expected a non-negative integer");
  return out;
}

double to_double(std::string_view v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw std::invalid_argument("expected a number");
  return out;
}

bool to_bool(std::string_view v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw std::invalid_argument("expected true or false");
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string quote(const std::filesystem::path& p) { return "\"" + p.string() + "\""; }

struct Field {
  std::string_view section;  // empty for top-level keys
  std::string_view key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T, typename Parse, typename Show>
Field make_field(std::string_view section, std::string_view key, T RunConfig::*block, Parse parse, Show show) {
  return {section, key, [=](RunConfig& c, std::string_view v) { parse(c.*block, v); },
          [=](const RunConfig& c) { return show(c.*block); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    const auto path_field = [&](std::string_view key, std::filesystem::path Paths::*member) {
      f.push_back(make_field(
          "paths", key, &RunConfig::paths, [member](Paths& p, std::string_view v) { p.*member = std::string(v); },
          [member](const Paths& p) { return quote(p.*member); }));
    };
    path_field("data", &Paths::data);
    path_field("corpus", &Paths::corpus);
    path_field("train_queries", &Paths::train_queries);
    path_field("dev_queries", &Paths::dev_queries);
    path_field("eval_queries", &Paths::eval_queries);
    path_field("qrels", &Paths::qrels);
    path_field("answers", &Paths::answers);
    path_field("checkpoint", &Paths::checkpoint);
    path_field("index_dir", &Paths::index_dir);
    path_field("output_dir", &Paths::output_dir);

    const auto model_size = [&](std::string_view key, std::size_t encoder::ModelConfig::*member) {
      f.push_back(make_field(
          "model", key, &RunConfig::model, [member](encoder::ModelConfig& m, std::string_view v) { m.*member = to_size(v); },
          [member](const encoder::ModelConfig& m) { return std::to_string(m.*member); }));
    };
    model_size("d_model", &encoder::ModelConfig::d_model);
    model_size("n_heads", &encoder::ModelConfig::n_heads);
    model_size("n_shared_layers", &encoder::ModelConfig::n_shared_layers);
    model_size("n_expert_layers", &encoder::ModelConfig::n_expert_layers);
    model_size("d_local", &encoder::ModelConfig::d_local);
    model_size("max_q_len", &encoder::ModelConfig::max_q_len);
    model_size("max_d_len", &encoder::ModelConfig::max_d_len);
    model_size("ff_width", &encoder::ModelConfig::ff_width);

    using trainer::TrainSchedule;
    const auto train_double = [&](std::string_view key, double TrainSchedule::*member) {
      f.push_back(make_field(
          "train", key, &RunConfig::schedule, [member](TrainSchedule& s, std::string_view v) { s.*member = to_double(v); },
          [member](const TrainSchedule& s) { return fmt_double(s.*member); }));
    };
    const auto train_size = [&](std::string_view key, std::size_t TrainSchedule::*member) {
      f.push_back(make_field(
          "train", key, &RunConfig::schedule, [member](TrainSchedule& s, std::string_view v) { s.*member = to_size(v); },
          [member](const TrainSchedule& s) { return std::to_string(s.*member); }));
    };
    const auto train_bool = [&](std::string_view key, bool TrainSchedule::*member) {
      f.push_back(make_field(
          "train", key, &RunConfig::schedule, [member](TrainSchedule& s, std::string_view v) { s.*member = to_bool(v); },
          [member](const TrainSchedule& s) { return std::string(s.*member ? "true" : "false"); }));
    };
    train_double("tau", &TrainSchedule::tau);
    train_double("standardized_ratio", &TrainSchedule::standardized_ratio);
    train_bool("specialized", &TrainSchedule::specialized);
    train_size("epochs_bootstrap", &TrainSchedule::epochs_bootstrap);
    train_size("epochs_hard", &TrainSchedule::epochs_hard);
    train_size("batch_size", &TrainSchedule::batch_size);
    train_size("negatives", &TrainSchedule::negatives);
    train_double("learning_rate", &TrainSchedule::learning_rate);
    train_double("weight_decay", &TrainSchedule::weight_decay);
    train_double("flops_weight", &TrainSchedule::flops_weight);
    train_size("mine_depth", &TrainSchedule::mine_depth);
    train_bool("resample_negatives", &TrainSchedule::resample_negatives);

    f.push_back({"retrieval", "k", [](RunConfig& c, std::string_view v) { c.k = to_size(v); },
                 [](const RunConfig& c) { return std::to_string(c.k); }});
    f.push_back({"retrieval", "fusion",
                 [](RunConfig& c, std::string_view v) { c.fusion = retrieval::parse_fusion_method(v); },
                 [](const RunConfig& c) { return quote(std::string(retrieval::to_string(c.fusion))); }});
    f.push_back({"eval", "metrics",
                 [](RunConfig& c, std::string_view v) {
                   c.metrics.clear();
                   while (!v.empty()) {
                     const auto comma = v.find(',');
                     const auto item = trim(v.substr(0, comma));
                     if (item.empty()) throw std::invalid_argument("empty metric in list");
                     c.metrics.push_back(parse_metric(item));
                     v = comma == std::string_view::npos ? std::string_view{} : v.substr(comma + 1);
                   }
                 },
                 [](const RunConfig& c) {
                   std::string s;
                   for (const auto& m : c.metrics) s += (s.empty() ? "" : ", ") + m.label();
                   return quote(s);
                 }});
    f.push_back({"", "seed", [](RunConfig& c, std::string_view v) { c.seed = to_u64(v); },
                 [](const RunConfig& c) { return std::to_string(c.seed); }});
    return f;
  }();
  return table;
}

const Field* find_field(std::string_view section, std::string_view key) {
  for (const auto& f : fields()) {
    if (f.section == section && f.key == key) return &f;
  }
  return nullptr;
}

bool known_section(std::string_view section) {
  for (const auto& f : fields()) {
    if (f.section == section) return true;
  }
  return false;
}

std::string_view unquote(std::string_view v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  return v;
}

void assign(RunConfig& config, std::string_view section, std::string_view key, std::string_view value,
            const std::string& where) {
  const Field* f = find_field(section, key);
  const std::string name = section.empty() ? std::string(key) : std::string(section) + "." + std::string(key);
  if (f == nullptr) throw std::invalid_argument(where + ": unknown key '" + name + "'");
  try {
    f->set(config, unquote(value));
  } catch (const std::exception& e) {
    throw std::invalid_argument(where + ": " + name + ": " + e.what());
  }
}

}  // namespace

MetricSpec parse_metric(std::string_view text) {
  const auto at = text.find('@');
  if (at == std::string_view::npos) throw std::invalid_argument("metric '" + std::string(text) + "' needs a cutoff, e.g. mrr@10");
  MetricSpec m{std::string(text.substr(0, at)), 0};
  static const std::set<std::string> names = {"mrr", "recall", "ndcg", "top"};
  if (names.count(m.name) == 0) throw std::invalid_argument("unknown metric '" + m.name + "'");
  try {
    m.cutoff = to_size(text.substr(at + 1));
  } catch (const std::exception&) {
    throw std::invalid_argument("metric '" + std::string(text) + "': bad cutoff");
  }
  if (m.cutoff == 0) throw std::invalid_argument("metric '" + std::string(text) + "': cutoff must be >= 1");
  return m;
}

RunConfig::RunConfig() {
  paths.output_dir = "runs";
  model.d_model = 32;
  model.n_heads = 2;
  model.n_shared_layers = 1;
  model.n_expert_layers = 1;
  model.d_local = 16;
  model.max_q_len = 12;
  model.max_d_len = 48;
  model.ff_width = 64;
  schedule.tau = 0.5;
  schedule.standardized_ratio = 0.2;
  schedule.epochs_bootstrap = 8;
  schedule.epochs_hard = 1;
  schedule.batch_size = 8;
  schedule.negatives = 3;
  schedule.learning_rate = 0.002;
  schedule.weight_decay = 0.01;
  schedule.flops_weight = 0.01;
  schedule.mine_depth = 20;
  metrics = {{"mrr", 10}, {"recall", 100}, {"ndcg", 10}};
}

void RunConfig::finalize() {
  const auto fill = [&](std::filesystem::path& p, const char* name) {
    if (p.empty() && !paths.data.empty()) p = paths.data / name;
  };
  fill(paths.corpus, "corpus.jsonl");
  fill(paths.train_queries, "queries.train.tsv");
  fill(paths.dev_queries, "queries.dev.tsv");
  fill(paths.eval_queries, "queries.test.tsv");
  fill(paths.qrels, "qrels.txt");
  fill(paths.answers, "answers.tsv");
  if (paths.output_dir.empty()) throw std::invalid_argument("paths.output_dir must be set");
  if (paths.checkpoint.empty()) paths.checkpoint = paths.output_dir / "model.ckpt";
  if (paths.index_dir.empty()) paths.index_dir = paths.output_dir / "index";
  schedule.seed = seed;
  schedule.validate();
  encoder::ModelConfig probe = model;
  probe.vocab_size = 3;
  probe.validate();
  if (k == 0) throw std::invalid_argument("retrieval.k must be >= 1");
  if (metrics.empty()) throw std::invalid_argument("eval.metrics must name at least one metric");
}

void apply_config_text(RunConfig& config, std::string_view text, std::string_view source) {
  std::string section;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    // '#' starts a comment unless it sits inside a quoted value.
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line = line.substr(0, i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw std::invalid_argument(where + ": malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (!known_section(section)) throw std::invalid_argument(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw std::invalid_argument(where + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    const std::string full = section + "." + std::string(key);
    if (!seen.insert(full).second) throw std::invalid_argument(where + ": duplicate key '" + std::string(key) + "'");
    assign(config, section, key, trim(line.substr(eq + 1)), where);
  }
}

void apply_override(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw std::invalid_argument("--set expects section.key=value");
  const auto name = trim(assignment.substr(0, eq));
  const auto dot = name.find('.');
  const auto section = dot == std::string_view::npos ? std::string_view{} : name.substr(0, dot);
  const auto key = dot == std::string_view::npos ? name : name.substr(dot + 1);
  assign(config, section, key, trim(assignment.substr(eq + 1)), "--set");
}

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig c;
  apply_config_text(c, read_file(path), path.string());
  return c;
}

void apply_seed_env(RunConfig& config) {
  const char* v = std::getenv("CAME_SEED");
  if (v == nullptr) return;
  try {
    config.seed = to_u64(trim(v));
  } catch (const std::exception&) {
    throw std::invalid_argument("CAME_SEED: expected a non-negative integer, got '" + std::string(v) + "'");
  }
}

std::string format_run_config(const RunConfig& config) {
  // Top-level keys first: after a section header they would belong to it.
  std::string out;
  for (const auto& f : fields()) {
    if (f.section.empty()) out += std::string(f.key) + " = " + f.get(config) + "\n";
  }
  std::string_view current;
  for (const auto& f : fields()) {
    if (f.section.empty()) continue;
    if (f.section != current) {
      out += "\n[" + std::string(f.section) + "]\n";
      current = f.section;
    }
    out += std::string(f.key) + " = " + f.get(config) + "\n";
  }
  return out;
}

}  // namespace came::cli
