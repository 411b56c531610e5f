#include "arched/evalstats.hpp"

#include "arched/csv.hpp"
#include "arched/error.hpp"
#include "arched/oae.hpp"
#include "arched/util.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>
#include <unordered_set>

namespace arched {

using nlohmann::json;

void LabeledCorpus::validate() const {
  std::unordered_set<std::string> seen;
  for (const auto& item : items) {
    if (!seen.insert(item.objective_id).second) {
      throw Error(ErrorCode::invalid_input, "duplicate objective id '" + item.objective_id + "' in corpus");
    }
  }
}

LabeledCorpus parse_corpus_csv(std::string_view payload, const std::string& description) {
  const auto rows = csv::parse(payload);
  if (rows.empty()) throw Error(ErrorCode::import_malformed, "empty corpus file");
  std::vector<std::string> header;
  for (const auto& h : rows[0]) header.push_back(to_lower(trim(h)));
  const auto col = [&](std::string_view name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto id_col = col("id");
  const auto text_col = col("text");
  const auto expert_col = col("expert_level");
  const auto system_col = col("system_level");
  if (!id_col || !expert_col) {
    throw Error(ErrorCode::import_malformed, "row 1: corpus header needs id and expert_level columns");
  }
  LabeledCorpus corpus;
  corpus.description = description;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const std::string where = "row " + std::to_string(r + 1);
    const auto cell = [&](std::optional<std::size_t> c) -> std::string {
      return (c && *c < rows[r].size()) ? rows[r][*c] : std::string();
    };
    LabeledItem item;
    item.objective_id = trim(cell(id_col));
    if (item.objective_id.empty()) throw Error(ErrorCode::import_malformed, where + ": id must be non-empty");
    item.text = cell(text_col);
    const auto expert = parse_level(cell(expert_col));
    if (!expert) throw Error(ErrorCode::import_malformed, where + ": expert_level must be one of the six Bloom levels");
    item.expert_level = *expert;
    if (const auto sys = trim(cell(system_col)); !sys.empty()) {
      item.system_level = parse_level(sys);
      if (!item.system_level) {
        throw Error(ErrorCode::import_malformed, where + ": system_level must be one of the six Bloom levels");
      }
    }
    corpus.items.push_back(std::move(item));
  }
  try {
    corpus.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::import_malformed, e.what());
  }
  return corpus;
}

std::string format_corpus_csv(const LabeledCorpus& corpus) {
  std::string out = csv::format_row({"id", "text", "expert_level", "system_level"});
  for (const auto& item : corpus.items) {
    out += csv::format_row({item.objective_id, item.text, std::string(to_string(item.expert_level)),
                            item.system_level ? std::string(to_string(*item.system_level)) : std::string()});
  }
  return out;
}

ConfusionMatrix confusion(const LabeledCorpus& corpus) {
  ConfusionMatrix m;
  for (const auto& item : corpus.items) {
    if (!item.system_level) {
      throw Error(ErrorCode::invalid_input, "item '" + item.objective_id + "' has no system_level",
                  {{"id", item.objective_id}});
    }
    ++m.counts[index(item.expert_level)][index(*item.system_level)];
    ++m.n;
  }
  return m;
}

KappaComponents weighted_kappa(const ConfusionMatrix& m) {
  if (m.n <= 0) throw Error(ErrorCode::invalid_input, "weighted kappa needs at least one item");
  const double n = static_cast<double>(m.n);
  std::array<double, 6> row{};
  std::array<double, 6> col{};
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      row[i] += static_cast<double>(m.counts[i][j]);
      col[j] += static_cast<double>(m.counts[i][j]);
    }
  }
  double po = 0.0;
  double pe = 0.0;
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      const double w = agreement_weight(level_at(i), level_at(j));
      po += w * static_cast<double>(m.counts[i][j]);
      pe += w * row[i] * col[j] / n;
    }
  }
  po /= n;
  pe /= n;
  if (1.0 - pe < 1e-12) {
    throw Error(ErrorCode::degenerate_marginals,
                "weighted kappa is undefined: both raters are constant on one level");
  }
  return {(po - pe) / (1.0 - pe), po, pe};
}

double percentile_linear(std::vector<double> values, double p) {
  if (values.empty()) throw Error(ErrorCode::invalid_input, "percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

KappaResult kappa_ci(const LabeledCorpus& corpus, int resamples, std::uint64_t seed) {
  corpus.validate();
  if (corpus.items.size() < 2) throw Error(ErrorCode::invalid_input, "kappa CI needs at least two items");
  if (resamples < 1) throw Error(ErrorCode::invalid_input, "resamples must be >= 1");
  const ConfusionMatrix full = confusion(corpus);
  std::set<int> expert_levels;
  std::set<int> system_levels;
  std::vector<std::pair<int, int>> pairs;
  for (const auto& item : corpus.items) {
    expert_levels.insert(index(item.expert_level));
    system_levels.insert(index(*item.system_level));
    pairs.emplace_back(index(item.expert_level), index(*item.system_level));
  }
  if (expert_levels.size() < 2 || system_levels.size() < 2) {
    throw Error(ErrorCode::invalid_input, "both raters must use at least two levels");
  }
  const auto point = weighted_kappa(full);

  KappaResult out;
  out.kappa = point.kappa;
  out.observed_agreement = point.observed_agreement;
  out.expected_agreement = point.expected_agreement;
  out.bootstrap_resamples = resamples;
  out.seed = seed;

  std::vector<double> stats;
  stats.reserve(static_cast<std::size_t>(resamples));
  const std::size_t n = pairs.size();
  for (int r = 0; r < resamples; ++r) {
    std::mt19937_64 rng(mix64(seed ^ mix64(static_cast<std::uint64_t>(r) + 1)));
    ConfusionMatrix m;
    m.n = static_cast<long long>(n);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& [e, s] = pairs[static_cast<std::size_t>(rng() % n)];
      ++m.counts[e][s];
    }
    try {
      stats.push_back(weighted_kappa(m).kappa);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::degenerate_marginals) throw;
      ++out.degenerate_resamples;
    }
  }
  if (out.degenerate_resamples * 2 > resamples) {
    throw Error(ErrorCode::unstable_estimate,
                std::to_string(out.degenerate_resamples) + " of " + std::to_string(resamples) +
                    " bootstrap resamples were degenerate");
  }
  out.ci_low = percentile_linear(stats, 0.025);
  out.ci_high = percentile_linear(stats, 0.975);
  return out;
}

// --- Mann-Whitney ------------------------------------------------------------

namespace {

struct Ranked {
  std::vector<double> ranks;  // pooled midranks, a first then b
  double tie_term = 0.0;      // sum of t^3 - t over tie groups
};

Ranked midranks(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size() + b.size();
  std::vector<std::pair<double, std::size_t>> pooled;
  pooled.reserve(n);
  for (std::size_t i = 0; i < a.size(); ++i) pooled.emplace_back(a[i], i);
  for (std::size_t i = 0; i < b.size(); ++i) pooled.emplace_back(b[i], a.size() + i);
  std::sort(pooled.begin(), pooled.end());
  Ranked out;
  out.ranks.assign(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && pooled[j].first == pooled[i].first) ++j;
    const double rank = (static_cast<double>(i + j) + 1.0) / 2.0;
    for (std::size_t k = i; k < j; ++k) out.ranks[pooled[k].second] = rank;
    const double t = static_cast<double>(j - i);
    out.tie_term += t * t * t - t;
    i = j;
  }
  return out;
}

void check_samples(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::invalid_input, "Mann-Whitney U needs two non-empty samples");
  for (const auto* s : {&a, &b}) {
    for (double v : *s) {
      if (!std::isfinite(v)) throw Error(ErrorCode::invalid_input, "Mann-Whitney U samples must be finite");
    }
  }
}

MwuResult base_result(const std::vector<double>& a, const std::vector<double>& b, const Ranked& r) {
  MwuResult out;
  out.n1 = a.size();
  out.n2 = b.size();
  const double n1 = static_cast<double>(a.size());
  const double r1 = std::accumulate(r.ranks.begin(), r.ranks.begin() + static_cast<long>(a.size()), 0.0);
  out.u1 = r1 - n1 * (n1 + 1.0) / 2.0;
  out.u = std::min(out.u1, n1 * static_cast<double>(b.size()) - out.u1);
  return out;
}

}  // namespace

MwuResult mann_whitney_u_exact(const std::vector<double>& a, const std::vector<double>& b) {
  check_samples(a, b);
  const std::size_t total = a.size() + b.size();
  if (total > k_exact_mwu_max_total) {
    throw Error(ErrorCode::invalid_input, "exact Mann-Whitney enumeration is limited to n1 + n2 <= 16");
  }
  const Ranked r = midranks(a, b);
  MwuResult out = base_result(a, b, r);
  out.method = MwuMethod::exact;
  const double n1 = static_cast<double>(a.size());
  const double mean = n1 * static_cast<double>(b.size()) / 2.0;
  const double observed = std::abs(out.u1 - mean);
  // Every assignment of n1 pooled positions to sample a is equally likely
  // under the null; midranks carry the ties.
  std::uint64_t extreme = 0;
  std::uint64_t count = 0;
  const std::uint32_t limit = 1u << total;
  for (std::uint32_t mask = 0; mask < limit; ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) != a.size()) continue;
    double r1 = 0.0;
    for (std::size_t k = 0; k < total; ++k) {
      if (mask & (1u << k)) r1 += r.ranks[k];
    }
    const double u1 = r1 - n1 * (n1 + 1.0) / 2.0;
    ++count;
    if (std::abs(u1 - mean) >= observed - 1e-9) ++extreme;
  }
  out.p_two_sided = std::clamp(static_cast<double>(extreme) / static_cast<double>(count), 0.0, 1.0);
  return out;
}

MwuResult mann_whitney_u_normal(const std::vector<double>& a, const std::vector<double>& b) {
  check_samples(a, b);
  const Ranked r = midranks(a, b);
  MwuResult out = base_result(a, b, r);
  out.method = MwuMethod::normal_approx;
  const double n1 = static_cast<double>(a.size());
  const double n2 = static_cast<double>(b.size());
  const double n = n1 + n2;
  const double mean = n1 * n2 / 2.0;
  double variance = n1 * n2 / 12.0 * (n + 1.0);
  if (n > 1.0) variance = n1 * n2 / 12.0 * ((n + 1.0) - r.tie_term / (n * (n - 1.0)));
  if (variance <= 0.0) {
    out.p_two_sided = 1.0;
    return out;
  }
  const double z = std::max(0.0, std::abs(out.u1 - mean) - 0.5) / std::sqrt(variance);
  out.p_two_sided = std::clamp(std::erfc(z / std::sqrt(2.0)), 0.0, 1.0);
  return out;
}

MwuResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b) {
  check_samples(a, b);
  if (a.size() + b.size() <= k_exact_mwu_max_total) return mann_whitney_u_exact(a, b);
  return mann_whitney_u_normal(a, b);
}

std::vector<double> bonferroni(const std::vector<double>& p_values, std::optional<std::size_t> m) {
  const std::size_t factor = m.value_or(p_values.size());
  if (factor < p_values.size()) throw Error(ErrorCode::invalid_input, "m must be at least the number of p-values");
  std::vector<double> out;
  out.reserve(p_values.size());
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::invalid_input, "p-values must lie in [0, 1]");
    out.push_back(std::min(1.0, p * static_cast<double>(factor)));
  }
  return out;
}

// --- evaluation runs -----------------------------------------------------------

EvaluationRun evaluate_corpus(LabeledCorpus corpus, const OaeEngine* engine, int resamples, std::uint64_t seed) {
  corpus.validate();
  EvaluationRun run;
  run.description = corpus.description;
  for (auto& item : corpus.items) {
    if (item.system_level) continue;
    if (!engine) {
      throw Error(ErrorCode::invalid_input, "item '" + item.objective_id + "' has no system_level",
                  {{"id", item.objective_id}});
    }
    LearningObjective obj;
    obj.id = item.objective_id;
    obj.text = item.text;
    item.system_level = engine->classify_level(obj).level;
    ++run.classified_by_engine;
  }
  run.matrix = confusion(corpus);
  run.kappa = kappa_ci(corpus, resamples, seed);
  long long off_diagonal = 0;
  long long adjacent = 0;
  for (int i = 0; i < 6; ++i) {
    long long row = 0;
    for (int j = 0; j < 6; ++j) {
      row += run.matrix.counts[i][j];
      if (i != j) off_diagonal += run.matrix.counts[i][j];
      if (std::abs(i - j) == 1) adjacent += run.matrix.counts[i][j];
    }
    if (row > 0) run.per_level_recall[i] = static_cast<double>(run.matrix.counts[i][i]) / static_cast<double>(row);
  }
  run.adjacent_share_defined = off_diagonal > 0;
  run.adjacent_confusion_share =
      off_diagonal > 0 ? static_cast<double>(adjacent) / static_cast<double>(off_diagonal) : 0.0;
  return run;
}

std::string format_kappa_line(const KappaResult& k) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "κw = %.3f (95%% CI: [%.3f, %.3f])", k.kappa, k.ci_low, k.ci_high);
  return buf;
}

std::string format_confusion_text(const ConfusionMatrix& m) {
  std::string out;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-12s", "expert\\sys");
  out += buf;
  for (auto l : k_all_levels) {
    std::snprintf(buf, sizeof buf, "%11s", std::string(to_string(l)).c_str());
    out += buf;
  }
  out += "\n";
  for (int i = 0; i < 6; ++i) {
    std::snprintf(buf, sizeof buf, "%-12s", std::string(to_string(level_at(i))).c_str());
    out += buf;
    for (int j = 0; j < 6; ++j) {
      std::snprintf(buf, sizeof buf, "%11lld", m.counts[i][j]);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

json to_json(const EvaluationRun& run) {
  json counts = json::array();
  for (const auto& row : run.matrix.counts) counts.push_back(row);
  json recall = json::object();
  for (auto l : k_all_levels) {
    const auto& r = run.per_level_recall[index(l)];
    recall[std::string(to_string(l))] = r ? json(*r) : json(nullptr);
  }
  json levels = json::array();
  for (auto l : k_all_levels) levels.push_back(to_string(l));
  return json{{"description", run.description},
              {"levels", levels},
              {"confusion", {{"counts", counts}, {"n", run.matrix.n}}},
              {"kappa",
               {{"kappa", run.kappa.kappa},
                {"observed_agreement", run.kappa.observed_agreement},
                {"expected_agreement", run.kappa.expected_agreement},
                {"ci_low", run.kappa.ci_low},
                {"ci_high", run.kappa.ci_high},
                {"bootstrap_resamples", run.kappa.bootstrap_resamples},
                {"degenerate_resamples", run.kappa.degenerate_resamples},
                {"seed", run.kappa.seed},
                {"ci_method", "percentile bootstrap, linear interpolation"}}},
              {"per_level_recall", recall},
              {"adjacent_confusion_share", run.adjacent_confusion_share},
              {"adjacent_share_defined", run.adjacent_share_defined},
              {"classified_by_engine", run.classified_by_engine},
              {"report_line", format_kappa_line(run.kappa)}};
}

std::string render_run_json(const EvaluationRun& run) { return to_json(run).dump() + "\n"; }

std::string render_run_markdown(const EvaluationRun& run) {
  std::string md = "# Classification agreement report\n\n";
  if (!run.description.empty()) md += run.description + "\n\n";
  md += "- Items: " + std::to_string(run.matrix.n) + "\n";
  md += "- " + format_kappa_line(run.kappa) + "\n";
  md += "- Bootstrap: " + std::to_string(run.kappa.bootstrap_resamples) + " resamples, seed " +
        std::to_string(run.kappa.seed) + ", " + std::to_string(run.kappa.degenerate_resamples) + " degenerate\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", run.adjacent_confusion_share);
  md += "- Adjacent-confusion share: " + std::string(buf) +
        (run.adjacent_share_defined ? "" : " (no off-diagonal mass)") + "\n\n";
  md += "## Confusion matrix (rows: expert, columns: system)\n\n| Expert \\ System |";
  for (auto l : k_all_levels) md += " " + std::string(to_string(l)) + " |";
  md += "\n|---|";
  for (std::size_t i = 0; i < k_all_levels.size(); ++i) md += "---|";
  md += "\n";
  for (int i = 0; i < 6; ++i) {
    md += "| " + std::string(to_string(level_at(i))) + " |";
    for (int j = 0; j < 6; ++j) md += " " + std::to_string(run.matrix.counts[i][j]) + " |";
    md += "\n";
  }
  md += "\n## Per-level recall\n\n| Level | Recall |\n|---|---|\n";
  for (auto l : k_all_levels) {
    const auto& r = run.per_level_recall[index(l)];
    if (r) std::snprintf(buf, sizeof buf, "%.3f", *r);
    md += "| " + std::string(to_string(l)) + " | " + (r ? std::string(buf) : std::string("n/a")) + " |\n";
  }
  return md;
}

LabeledCorpus make_synthetic_corpus(std::size_t n, double diagonal_share, std::uint64_t seed) {
  std::mt19937_64 rng(mix64(seed));
  LabeledCorpus corpus;
  char desc[128];
  std::snprintf(desc, sizeof desc, "synthetic corpus: n=%zu, diagonal share %.2f, seed %llu", n, diagonal_share,
                static_cast<unsigned long long>(seed));
  corpus.description = desc;
  const auto agree = static_cast<std::size_t>(std::llround(diagonal_share * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> on_diagonal(n, false);
  for (std::size_t k = 0; k < agree && k < n; ++k) on_diagonal[order[k]] = true;

  for (std::size_t i = 0; i < n; ++i) {
    const BloomLevel expert = level_at(static_cast<int>(i % 6));
    BloomLevel system = expert;
    if (!on_diagonal[i]) {
      std::vector<int> targets;
      std::vector<double> weights;
      for (int j = 0; j < 6; ++j) {
        const int d = std::abs(j - index(expert));
        if (d == 0) continue;
        targets.push_back(j);
        weights.push_back(std::ldexp(1.0, -(d - 1)));
      }
      std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
      system = level_at(targets[pick(rng)]);
    }
    const auto verbs = verbs_for_level(expert);
    LabeledItem item;
    char id[32];
    std::snprintf(id, sizeof id, "syn-%03zu", i + 1);
    item.objective_id = id;
    item.text = "Students will " + verbs[i % verbs.size()] + " material from unit " + std::to_string(i / 6 + 1);
    item.expert_level = expert;
    item.system_level = system;
    corpus.items.push_back(std::move(item));
  }
  return corpus;
}

}  // namespace arched
