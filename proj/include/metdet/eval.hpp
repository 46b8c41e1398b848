#ifndef METDET_EVAL_HPP
#define METDET_EVAL_HPP

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "metdet/corpus.hpp"

namespace metdet {

// Metaphor (label 1) is the positive class throughout.
struct ConfusionCounts {
  long tp = 0, fp = 0, fn = 0, tn = 0;

  long total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion(const std::vector<int>& preds, const std::vector<int>& labels);

struct Prf {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  bool operator==(const Prf&) const = default;
};

// P = tp/(tp+fp), R = tp/(tp+fn), F1 = 2PR/(P+R); every 0/0 resolves to 0.
Prf precision_recall_f1(const ConfusionCounts& c);

struct SeedMetrics {
  int seed = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct MetricsReport {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  std::map<PosTag, Prf> per_pos;        // buckets with no instances are absent
  std::vector<SeedMetrics> per_seed;    // populated by multi-seed aggregation
};

// Arithmetic means of the per-seed metric vectors.
MetricsReport aggregate_seed_metrics(const std::vector<SeedMetrics>& per_seed);

std::map<PosTag, ConfusionCounts> confusion_by_pos(
    const std::vector<int>& preds, const std::vector<CorpusInstance>& dataset);

std::map<PosTag, Prf> evaluate_by_pos(const std::vector<int>& preds,
                                      const std::vector<CorpusInstance>& dataset);

// ---------------------------------------------------------------------------
// Significance testing
// ---------------------------------------------------------------------------

struct SignificanceResult {
  double t_statistic = 0.0;
  double p_value = 1.0;
  // Integral for the pooled-variance test; fractional under the Welch option.
  double degrees_of_freedom = 0.0;
  bool significant_at_05 = false;
};

// Two-tailed two-sample Student's t-test with pooled variance (default) or
// the Welch variant. Zero pooled variance is handled by convention: equal
// means give p = 1, unequal means give p = 0.
SignificanceResult two_tailed_ttest(const std::vector<double>& a,
                                    const std::vector<double>& b, bool welch = false);

// Regularized incomplete beta I_x(a, b) via the standard continued-fraction
// evaluation; accurate to ~1e-12 for the degrees of freedom used here.
double regularized_incomplete_beta(double a, double b, double x);

// P(|T_df| > |t|) for Student's t.
double student_t_two_tailed_p(double t, double df);

// ---------------------------------------------------------------------------
// Case studies: rows where models disagree
// ---------------------------------------------------------------------------

struct CaseStudyRow {
  std::string sentence_id;
  std::string sentence;
  std::string target_word;
  int true_label = 0;
  std::vector<std::pair<std::string, int>> model_predictions;  // (model, label)
  std::string sense_definition;
  std::string basic_definition;
};

std::vector<CaseStudyRow> case_studies(
    const std::vector<std::pair<std::string, std::vector<int>>>& model_preds,
    const std::vector<AugmentedInstance>& dataset);

std::string render_case_studies_tsv(const std::vector<CaseStudyRow>& rows);
std::string render_case_studies_text(const std::vector<CaseStudyRow>& rows);

// ---------------------------------------------------------------------------
// Predictions and metrics files
// ---------------------------------------------------------------------------

struct Prediction {
  std::string sentence_id;
  int label = 0;
  double p_metaphor = 0.0;
};

void write_predictions(const std::vector<Prediction>& preds,
                       const std::filesystem::path& path,
                       const std::string& provenance = "");
std::vector<Prediction> read_predictions(const std::filesystem::path& path);

void write_metrics_report(const MetricsReport& report,
                          const std::filesystem::path& path,
                          const std::string& provenance = "");
// Per-seed rows of a metrics file ("seed:N" lines).
std::vector<SeedMetrics> read_seed_metrics(const std::filesystem::path& path);

}  // namespace metdet

#endif
