#include "arched/cli.hpp"

#include "arched/api.hpp"
#include "arched/csv.hpp"
#include "arched/evalstats.hpp"
#include "arched/logs.hpp"
#include "arched/oae.hpp"
#include "arched/util.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <ostream>
#include <thread>

namespace arched::cli {

namespace {

using nlohmann::json;

std::atomic<bool> g_stop_requested{false};

extern "C" void on_signal(int) { g_stop_requested = true; }

bool is_backend_error(ErrorCode c) {
  return c == ErrorCode::backend_timeout || c == ErrorCode::backend_request || c == ErrorCode::backend_protocol ||
         c == ErrorCode::backend_unavailable || c == ErrorCode::validation_exhausted;
}

void write_output(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << content;
  } else {
    write_file(path, content);
  }
}

std::string_view level_name(BloomLevel l) { return to_string(l); }

// --- classify -----------------------------------------------------------------

struct ClassifyArgs {
  std::string in, out;
  bool llm = false;
};

int cmd_classify(const ClassifyArgs& a, std::ostream& out) {
  auto rows = csv::parse(read_file(a.in));
  if (rows.empty()) throw Error(ErrorCode::import_malformed, "row 1: file is empty");
  auto& header = rows.front();
  const auto text_it = std::find(header.begin(), header.end(), "text");
  if (text_it == header.end()) throw Error(ErrorCode::import_malformed, "row 1: no text column");
  const auto text_col = static_cast<std::size_t>(text_it - header.begin());
  const auto id_it = std::find(header.begin(), header.end(), "id");
  auto sys_it = std::find(header.begin(), header.end(), "system_level");
  std::size_t sys_col = static_cast<std::size_t>(sys_it - header.begin());
  if (sys_it == header.end()) header.push_back("system_level");

  std::unique_ptr<llm::Gateway> gateway;
  std::unique_ptr<OaeEngine> engine;
  if (a.llm) {
    gateway = std::make_unique<llm::Gateway>(llm::BackendConfig::from_env());
    engine = std::make_unique<OaeEngine>(*gateway);
  }

  std::string result = csv::format_row(header);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    auto& row = rows[r];
    if (row.size() <= text_col) {
      throw Error(ErrorCode::import_malformed, "row " + std::to_string(r + 1) + ": missing text field");
    }
    BloomLevel level = BloomLevel::Understand;
    if (engine) {
      LearningObjective obj;
      obj.id = id_it != header.end() && row.size() > static_cast<std::size_t>(id_it - header.begin())
                   ? row[id_it - header.begin()]
                   : "row-" + std::to_string(r + 1);
      obj.text = row[text_col];
      level = engine->classify_level(obj).level;
    } else if (const auto l = classify_by_verb(row[text_col])) {
      level = *l;
    }
    row.resize(std::max(row.size(), sys_col + 1));
    row[sys_col] = std::string(level_name(level));
    result += csv::format_row(row);
  }
  write_output(a.out, result, out);
  return k_ok;
}

// --- eval ---------------------------------------------------------------------

struct EvalArgs {
  std::string in, out, markdown;
  int resamples = k_default_resamples;
  std::uint64_t seed = k_default_seed;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  auto corpus = parse_corpus_csv(read_file(a.in), a.in);
  const auto run = evaluate_corpus(std::move(corpus), nullptr, a.resamples, a.seed);
  out << format_confusion_text(run.matrix) << "\n";
  out << format_kappa_line(run.kappa) << "\n";
  if (run.adjacent_share_defined) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "adjacent-level share of disagreements: %.1f%%\n",
                  100.0 * run.adjacent_confusion_share);
    out << buf;
  }
  if (!a.out.empty()) write_file(a.out, render_run_json(run));
  if (!a.markdown.empty()) write_file(a.markdown, render_run_markdown(run));
  return k_ok;
}

// --- compare ------------------------------------------------------------------

using ScoreTable = std::array<std::vector<double>, 5>;

ScoreTable read_scores(const std::string& path) {
  const auto rows = csv::parse(read_file(path));
  if (rows.empty()) throw Error(ErrorCode::import_malformed, path + ": row 1: file is empty");
  const auto& header = rows.front();
  std::array<std::size_t, 5> cols{};
  for (std::size_t c = 0; c < k_all_criteria.size(); ++c) {
    const auto key = key_of(k_all_criteria[c]);
    const auto it = std::find(header.begin(), header.end(), key);
    if (it == header.end()) {
      throw Error(ErrorCode::import_malformed, path + ": row 1: missing column '" + std::string(key) + "'");
    }
    cols[c] = static_cast<std::size_t>(it - header.begin());
  }
  ScoreTable t;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const std::string where = path + ": row " + std::to_string(r + 1);
      if (rows[r].size() <= cols[c]) throw Error(ErrorCode::import_malformed, where + ": too few fields");
      const std::string cell = trim(rows[r][cols[c]]);
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (cell.empty() || used != cell.size()) {
        throw Error(ErrorCode::import_malformed,
                    where + ": " + std::string(key_of(k_all_criteria[c])) + " is not a number");
      }
      t[c].push_back(v);
    }
  }
  if (t[0].empty()) throw Error(ErrorCode::import_malformed, path + ": no score rows");
  return t;
}

struct CompareArgs {
  std::string a, b, out, label_a = "A", label_b = "B";
  double alpha = 0.05;
};

int cmd_compare(const CompareArgs& args, std::ostream& out) {
  const auto a = read_scores(args.a);
  const auto b = read_scores(args.b);
  std::vector<MwuResult> tests;
  std::vector<double> p;
  for (std::size_t c = 0; c < a.size(); ++c) {
    tests.push_back(mann_whitney_u(a[c], b[c]));
    p.push_back(tests.back().p_two_sided);
  }
  const auto adjusted = bonferroni(p, k_all_criteria.size());

  out << "| Criterion | " << args.label_a << " (mean±SD) | " << args.label_b
      << " (mean±SD) | U | p | p (Bonferroni) |\n";
  out << "|---|---|---|---|---|---|\n";
  json rows = json::array();
  std::vector<std::string> significant;
  for (std::size_t c = 0; c < a.size(); ++c) {
    const auto sa = summarize(a[c]);
    const auto sb = summarize(b[c]);
    char stats[128];
    std::snprintf(stats, sizeof stats, "%.1f | %.3f | %.3f", tests[c].u, p[c], adjusted[c]);
    out << "| " << label_of(k_all_criteria[c]) << " | " << format_mean_sd(sa.mean, sa.sd) << " | "
        << format_mean_sd(sb.mean, sb.sd) << " | " << stats << " |\n";
    if (adjusted[c] < args.alpha) significant.emplace_back(label_of(k_all_criteria[c]));
    rows.push_back({{"criterion", key_of(k_all_criteria[c])},
                    {"mean_a", sa.mean},
                    {"sd_a", sa.sd},
                    {"mean_b", sb.mean},
                    {"sd_b", sb.sd},
                    {"u", tests[c].u},
                    {"n_a", tests[c].n1},
                    {"n_b", tests[c].n2},
                    {"method", tests[c].method == MwuMethod::exact ? "exact" : "normal-approx"},
                    {"p", p[c]},
                    {"p_bonferroni", adjusted[c]}});
  }
  char alpha[32];
  std::snprintf(alpha, sizeof alpha, "%.2f", args.alpha);
  std::string summary;
  if (significant.empty()) {
    summary = "no significant differences (Bonferroni-adjusted p >= " + std::string(alpha) + " for all criteria)";
  } else {
    summary = "significant differences (Bonferroni-adjusted p < " + std::string(alpha) + "):";
    for (const auto& s : significant) summary += " " + s;
  }
  out << "\n" << summary << "\n";
  if (!args.out.empty()) {
    write_file(args.out, json{{"criteria", rows}, {"alpha", args.alpha}, {"summary", summary}}.dump(2) + "\n");
  }
  return k_ok;
}

// --- generate -----------------------------------------------------------------

struct GenerateArgs {
  std::string spec, out, format = "csv";
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  json j;
  try {
    j = json::parse(read_file(a.spec));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::invalid_input, a.spec + " is not valid JSON: " + e.what());
  }
  const auto spec = j.get<GenerationSpec>();
  const auto format = parse_set_format(a.format);
  if (!format) throw Error(ErrorCode::invalid_input, "--format must be csv or json");
  llm::Gateway gateway(llm::BackendConfig::from_env());
  LogsEngine engine(gateway);
  const auto batch = engine.generate(spec);
  ObjectiveSet set;
  set.id = "set-" + batch.prompt_fingerprint;
  set.title = spec.subject + ": " + spec.topic;
  set.objectives = batch.objectives;
  set.created_at = batch.created_at;
  set.source = "generate";
  write_output(a.out, export_set(set, *format), out);
  return k_ok;
}

// --- serve --------------------------------------------------------------------

struct ServeArgs {
  std::string config, host, data, ui;
  int port = -1;
  std::vector<std::string> cors;
};

int cmd_serve(const ServeArgs& a, std::ostream& out) {
  api::ServerConfig cfg;
  if (!a.config.empty()) cfg = api::ServerConfig::from_file(a.config, cfg);
  cfg = api::ServerConfig::from_env(cfg);
  if (!a.host.empty()) cfg.host = a.host;
  if (a.port >= 0) cfg.port = a.port;
  if (!a.data.empty()) cfg.data_dir = a.data;
  if (!a.ui.empty()) cfg.ui_dir = a.ui;
  if (!a.cors.empty()) cfg.cors_origins = a.cors;

  api::Service service(cfg);
  service.start();
  if (cfg.host != "127.0.0.1" && cfg.host != "localhost" && cfg.host != "::1") {
    out << "warning: the API has no authentication and is exposed on " << cfg.host << "\n";
  }
  out << "arched listening on http://" << cfg.host << ":" << service.port() << "\n" << std::flush;

  g_stop_requested = false;
  auto prev_int = std::signal(SIGINT, on_signal);
  auto prev_term = std::signal(SIGTERM, on_signal);
  while (!g_stop_requested) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  service.stop();
  std::signal(SIGINT, prev_int);
  std::signal(SIGTERM, prev_term);
  out << "stopped\n";
  return k_ok;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ARCHED: learning objective generation and analysis"};
  app.name("arched");
  app.require_subcommand(1);
  bool json_errors = false;
  app.add_flag("--json-errors", json_errors, "Print errors as JSON on stderr");

  ClassifyArgs classify;
  auto* c = app.add_subcommand("classify", "Append a system_level column using the verb classifier or the LLM");
  c->add_option("--in", classify.in, "Objectives CSV with a text column")->required();
  c->add_option("--out", classify.out, "Output CSV (default: stdout)");
  c->add_flag("--llm", classify.llm, "Classify with the configured LLM backend instead of the verb rules");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Agreement between expert and system levels");
  e->add_option("--in", eval.in, "Labeled CSV: id,text,expert_level,system_level")->required();
  e->add_option("--resamples", eval.resamples, "Bootstrap resamples")->capture_default_str()->check(
      CLI::Range(1, 1000000));
  e->add_option("--seed", eval.seed, "Bootstrap seed")->capture_default_str();
  e->add_option("--out", eval.out, "Write the evaluation run as JSON");
  e->add_option("--markdown", eval.markdown, "Write the evaluation run as Markdown");

  CompareArgs compare;
  auto* m = app.add_subcommand("compare", "Per-criterion Mann-Whitney U between two score files");
  m->add_option("--a", compare.a, "Scores CSV: id,structural,taxonomic,measurable,clarity,technical")->required();
  m->add_option("--b", compare.b, "Second scores CSV, same columns")->required();
  m->add_option("--label-a", compare.label_a, "Column label for --a")->capture_default_str();
  m->add_option("--label-b", compare.label_b, "Column label for --b")->capture_default_str();
  m->add_option("--alpha", compare.alpha, "Significance level")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  m->add_option("--out", compare.out, "Write the comparison as JSON");

  GenerateArgs generate;
  auto* g = app.add_subcommand("generate", "One-shot objective generation from a spec file");
  g->add_option("--spec", generate.spec, "GenerationSpec JSON")->required();
  g->add_option("--out", generate.out, "Output file (default: stdout)");
  g->add_option("--format", generate.format, "csv or json")->capture_default_str();

  ServeArgs serve;
  auto* s = app.add_subcommand("serve", "Run the HTTP API");
  s->add_option("--config", serve.config, "JSON config file");
  s->add_option("--host", serve.host, "Bind address (default 127.0.0.1)");
  s->add_option("--port", serve.port, "Port (default 8080, 0 picks a free port)")->check(CLI::Range(0, 65535));
  s->add_option("--data", serve.data, "Data directory for session files");
  s->add_option("--ui", serve.ui, "Directory of static UI files to serve at /");
  s->add_option("--cors", serve.cors, "Allowed CORS origin (repeatable)");

  const auto fail = [&](int code, std::string_view kind, const std::string& message, const json& detail) {
    if (json_errors) {
      json j{{"code", kind}, {"message", message}, {"exit_code", code}};
      if (!detail.is_null()) j["detail"] = detail;
      err << j.dump() << "\n";
    } else {
      err << "error: " << message << "\n";
    }
    return code;
  };

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return k_ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return k_ok;
  } catch (const CLI::ParseError& pe) {
    return fail(k_usage, "usage", pe.what(), nullptr);
  }

  try {
    if (c->parsed()) return cmd_classify(classify, out);
    if (e->parsed()) return cmd_eval(eval, out);
    if (m->parsed()) return cmd_compare(compare, out);
    if (g->parsed()) return cmd_generate(generate, out);
    if (s->parsed()) return cmd_serve(serve, out);
  } catch (const Error& ex) {
    return fail(is_backend_error(ex.code()) ? k_backend : k_data, to_string(ex.code()), ex.what(), ex.detail());
  } catch (const std::exception& ex) {
    return fail(k_data, "internal", ex.what(), nullptr);
  }
  return k_usage;
}

}  // namespace arched::cli
