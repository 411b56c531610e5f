#pragma once

#include "arched/bloom.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace arched {

class OaeEngine;

struct LabeledItem {
  std::string objective_id;
  std::string text;
  BloomLevel expert_level = BloomLevel::Remember;
  std::optional<BloomLevel> system_level;

  bool operator==(const LabeledItem&) const = default;
};

struct LabeledCorpus {
  std::vector<LabeledItem> items;
  std::string description;

  // Throws invalid-input on duplicate ids.
  void validate() const;
};

// CSV `id,text,expert_level,system_level` (system_level optional).
LabeledCorpus parse_corpus_csv(std::string_view payload, const std::string& description = "");
std::string format_corpus_csv(const LabeledCorpus& corpus);

struct ConfusionMatrix {
  // rows: expert level, columns: system level
  std::array<std::array<long long, 6>, 6> counts{};
  long long n = 0;

  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(const LabeledCorpus& corpus);

struct KappaComponents {
  double kappa = 0.0;
  double observed_agreement = 0.0;
  double expected_agreement = 0.0;
};

// Linearly weighted Cohen's kappa with agreement weights 1 - |i-j|/5.
// Throws invalid-input for n = 0 and degenerate-marginals when
// 1 - p_e < 1e-12.
KappaComponents weighted_kappa(const ConfusionMatrix& m);

struct KappaResult {
  double kappa = 0.0;
  double observed_agreement = 0.0;
  double expected_agreement = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int bootstrap_resamples = 0;
  std::uint64_t seed = 0;
  int degenerate_resamples = 0;

  bool operator==(const KappaResult&) const = default;
};

inline constexpr int k_default_resamples = 10000;
inline constexpr std::uint64_t k_default_seed = 42;

// Percentile bootstrap (resampling items with replacement). Percentiles use
// linear interpolation between order statistics: the p-quantile of sorted
// x[0..n-1] is x[h] + (h - floor h)(x[floor h + 1] - x[floor h]), h = (n-1)p.
// Resample r draws from a generator seeded by mix64(seed, r), so results do
// not depend on evaluation order.
KappaResult kappa_ci(const LabeledCorpus& corpus, int resamples = k_default_resamples,
                     std::uint64_t seed = k_default_seed);

double percentile_linear(std::vector<double> values, double p);

enum class MwuMethod { exact, normal_approx };

struct MwuResult {
  double u = 0.0;   // min(U1, U2)
  double u1 = 0.0;  // statistic for sample a
  double p_two_sided = 1.0;
  MwuMethod method = MwuMethod::exact;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
};

inline constexpr std::size_t k_exact_mwu_max_total = 16;

// Exact enumeration when n1 + n2 <= 16, otherwise the normal approximation
// with tie-corrected variance and continuity correction.
MwuResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b);
MwuResult mann_whitney_u_exact(const std::vector<double>& a, const std::vector<double>& b);
MwuResult mann_whitney_u_normal(const std::vector<double>& a, const std::vector<double>& b);

// adjusted_i = min(1, p_i * m); m defaults to the number of p-values.
std::vector<double> bonferroni(const std::vector<double>& p_values, std::optional<std::size_t> m = std::nullopt);

struct EvaluationRun {
  std::string description;
  ConfusionMatrix matrix;
  KappaResult kappa;
  std::array<std::optional<double>, 6> per_level_recall{};  // absent when the expert never used the level
  double adjacent_confusion_share = 0.0;
  bool adjacent_share_defined = false;  // false when there is no off-diagonal mass
  int classified_by_engine = 0;
};

// Items without system_level are classified through the engine first; with
// no engine they are an error.
EvaluationRun evaluate_corpus(LabeledCorpus corpus, const OaeEngine* engine = nullptr,
                              int resamples = k_default_resamples, std::uint64_t seed = k_default_seed);

nlohmann::json to_json(const EvaluationRun& run);
std::string render_run_json(const EvaluationRun& run);
std::string render_run_markdown(const EvaluationRun& run);

// "κw = 0.834 (95% CI: [0.771, 0.891])"
std::string format_kappa_line(const KappaResult& k);

// Fixed-width text grid, expert levels as rows, system levels as columns.
std::string format_confusion_text(const ConfusionMatrix& m);

// n items spread evenly over the six expert levels; exactly
// round(diagonal_share * n) agree, the rest are displaced by a distance d
// drawn with probability proportional to 2^-(d-1) among valid targets.
LabeledCorpus make_synthetic_corpus(std::size_t n = 120, double diagonal_share = 0.85,
                                    std::uint64_t seed = k_default_seed);

}  // namespace arched
