#include "metdet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "metdet/error.hpp"
#include "metdet/tsv.hpp"

namespace metdet {

namespace {

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void require_binary(const std::vector<int>& xs, const char* what) {
  for (int x : xs)
    if (x != 0 && x != 1)
      throw validation_error("BadLabel",
                             std::string(what) + " must be 0/1, got " + std::to_string(x));
}

double sample_mean(const std::vector<double>& xs) {
  double s = 0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_variance(const std::vector<double>& xs, double mean) {
  double s = 0;
  for (double x : xs) s += (x - mean) * (x - mean);
  return s / static_cast<double>(xs.size() - 1);
}

}  // namespace

ConfusionCounts confusion(const std::vector<int>& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size())
    throw validation_error("LengthMismatch",
                           "got " + std::to_string(preds.size()) + " predictions for " +
                               std::to_string(labels.size()) + " labels");
  require_binary(preds, "predictions");
  require_binary(labels, "labels");
  ConfusionCounts c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] == 1)
      preds[i] == 1 ? ++c.tp : ++c.fn;
    else
      preds[i] == 1 ? ++c.fp : ++c.tn;
  }
  return c;
}

Prf precision_recall_f1(const ConfusionCounts& c) {
  Prf m;
  m.precision = (c.tp + c.fp) > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  m.recall = (c.tp + c.fn) > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  m.f1 = (m.precision + m.recall) > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

MetricsReport aggregate_seed_metrics(const std::vector<SeedMetrics>& per_seed) {
  if (per_seed.empty())
    throw validation_error("EmptyAggregate", "no per-seed metrics to aggregate");
  MetricsReport report;
  report.per_seed = per_seed;
  for (const auto& s : per_seed) {
    report.precision += s.precision;
    report.recall += s.recall;
    report.f1 += s.f1;
  }
  const auto n = static_cast<double>(per_seed.size());
  report.precision /= n;
  report.recall /= n;
  report.f1 /= n;
  return report;
}

std::map<PosTag, ConfusionCounts> confusion_by_pos(
    const std::vector<int>& preds, const std::vector<CorpusInstance>& dataset) {
  if (preds.size() != dataset.size())
    throw validation_error("LengthMismatch",
                           "got " + std::to_string(preds.size()) + " predictions for " +
                               std::to_string(dataset.size()) + " instances");
  std::map<PosTag, std::pair<std::vector<int>, std::vector<int>>> buckets;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    auto& [p, l] = buckets[dataset[i].pos_tag];
    p.push_back(preds[i]);
    l.push_back(dataset[i].label);
  }
  std::map<PosTag, ConfusionCounts> out;
  for (auto& [tag, pl] : buckets) out[tag] = confusion(pl.first, pl.second);
  return out;
}

std::map<PosTag, Prf> evaluate_by_pos(const std::vector<int>& preds,
                                      const std::vector<CorpusInstance>& dataset) {
  std::map<PosTag, Prf> out;
  for (const auto& [tag, counts] : confusion_by_pos(preds, dataset))
    out[tag] = precision_recall_f1(counts);
  return out;
}

// ---------------------------------------------------------------------------
// Significance testing
// ---------------------------------------------------------------------------

namespace {

// Continued-fraction core of the incomplete beta (Lentz's algorithm).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-15;
  constexpr double kFpMin = 1e-300;

  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0))
    throw validation_error("BadBetaParams", "beta parameters must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log1p(-x);
  const double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_tailed_p(double t, double df) {
  if (!(df > 0.0))
    throw validation_error("BadBetaParams", "degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  const double x = df / (df + t * t);
  return regularized_incomplete_beta(0.5 * df, 0.5, x);
}

SignificanceResult two_tailed_ttest(const std::vector<double>& a,
                                    const std::vector<double>& b, bool welch) {
  if (a.size() < 2 || b.size() < 2)
    throw validation_error("SampleTooSmall",
                           "both samples need at least two observations");
  const auto na = static_cast<double>(a.size());
  const auto nb = static_cast<double>(b.size());
  const double ma = sample_mean(a), mb = sample_mean(b);
  const double va = sample_variance(a, ma), vb = sample_variance(b, mb);

  SignificanceResult res;
  double se = 0.0;
  if (welch) {
    const double qa = va / na, qb = vb / nb;
    se = std::sqrt(qa + qb);
    res.degrees_of_freedom =
        se > 0.0 ? (qa + qb) * (qa + qb) /
                       (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0))
                 : na + nb - 2.0;
  } else {
    res.degrees_of_freedom = na + nb - 2.0;
    const double pooled =
        ((na - 1.0) * va + (nb - 1.0) * vb) / res.degrees_of_freedom;
    se = std::sqrt(pooled * (1.0 / na + 1.0 / nb));
  }

  if (se == 0.0) {
    // Zero variance on both sides: identical constants give p = 1, distinct
    // constants are trivially separated, p = 0.
    if (ma == mb) {
      res.t_statistic = 0.0;
      res.p_value = 1.0;
    } else {
      res.t_statistic = ma > mb ? std::numeric_limits<double>::infinity()
                                : -std::numeric_limits<double>::infinity();
      res.p_value = 0.0;
    }
  } else {
    res.t_statistic = (ma - mb) / se;
    res.p_value = student_t_two_tailed_p(res.t_statistic, res.degrees_of_freedom);
  }
  res.significant_at_05 = res.p_value < 0.05;
  return res;
}

// ---------------------------------------------------------------------------
// Case studies
// ---------------------------------------------------------------------------

std::vector<CaseStudyRow> case_studies(
    const std::vector<std::pair<std::string, std::vector<int>>>& model_preds,
    const std::vector<AugmentedInstance>& dataset) {
  for (const auto& [model, preds] : model_preds) {
    if (preds.size() != dataset.size())
      throw validation_error("LengthMismatch",
                             "model '" + model + "' has " +
                                 std::to_string(preds.size()) + " predictions for " +
                                 std::to_string(dataset.size()) + " instances");
    require_binary(preds, "predictions");
  }

  std::vector<CaseStudyRow> rows;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    bool disagree = false;
    for (std::size_t m = 1; m < model_preds.size(); ++m)
      disagree |= model_preds[m].second[i] != model_preds[0].second[i];
    if (!disagree) continue;

    CaseStudyRow row;
    const auto& aug = dataset[i];
    row.sentence_id = aug.base.sentence_id;
    for (std::size_t t = 0; t < aug.base.tokens.size(); ++t) {
      if (t) row.sentence += ' ';
      row.sentence += aug.base.tokens[t];
    }
    row.target_word = aug.base.target_word();
    row.true_label = aug.base.label;
    for (const auto& [model, preds] : model_preds)
      row.model_predictions.emplace_back(model, preds[i]);
    row.sense_definition = aug.sense_definition;
    row.basic_definition = aug.basic_definition;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string render_case_studies_tsv(const std::vector<CaseStudyRow>& rows) {
  std::ostringstream out;
  out << "sentence_id\tsentence\ttarget_word\ttrue_label";
  if (!rows.empty())
    for (const auto& [model, pred] : rows[0].model_predictions) out << '\t' << model;
  out << "\tsense_definition\tbasic_definition\n";
  for (const auto& row : rows) {
    out << tsv::escape(row.sentence_id) << '\t' << tsv::escape(row.sentence) << '\t'
        << tsv::escape(row.target_word) << '\t' << row.true_label;
    for (const auto& [model, pred] : row.model_predictions) out << '\t' << pred;
    out << '\t' << tsv::escape(row.sense_definition) << '\t'
        << tsv::escape(row.basic_definition) << '\n';
  }
  return out.str();
}

std::string render_case_studies_text(const std::vector<CaseStudyRow>& rows) {
  if (rows.empty()) return "no disagreements\n";
  std::ostringstream out;
  for (const auto& row : rows) {
    out << row.sentence_id << "  target='" << row.target_word << "'  true="
        << (row.true_label ? "metaphor" : "literal") << '\n';
    out << "  " << row.sentence << '\n';
    for (const auto& [model, pred] : row.model_predictions)
      out << "    " << model << ": " << (pred ? "metaphor" : "literal") << '\n';
    out << "    sense: " << row.sense_definition << '\n';
    out << "    basic: " << row.basic_definition << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Predictions and metrics files
// ---------------------------------------------------------------------------

void write_predictions(const std::vector<Prediction>& preds,
                       const std::filesystem::path& path,
                       const std::string& provenance) {
  std::ofstream out(path);
  if (!out) throw io_error("FileOpen", "cannot write " + path.string());
  if (!provenance.empty()) out << "# " << provenance << '\n';
  out << "sentence_id\tpredicted_label\tp_metaphor\n";
  char buf[40];
  for (const auto& p : preds) {
    std::snprintf(buf, sizeof(buf), "%.9f", p.p_metaphor);
    out << tsv::escape(p.sentence_id) << '\t' << p.label << '\t' << buf << '\n';
  }
  if (!out) throw io_error("FileWrite", "write failure on " + path.string());
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("FileOpen", "cannot open " + path.string());
  std::vector<Prediction> preds;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!header_seen) {
      if (!line.empty() && line[0] == '#') continue;
      if (line != "sentence_id\tpredicted_label\tp_metaphor")
        throw validation_error("MissingColumn",
                               path.string() + ":" + std::to_string(line_no) +
                                   ": bad predictions header");
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    auto fields = tsv::split(line);
    if (fields.size() != 3)
      throw validation_error("MissingColumn",
                             path.string() + ":" + std::to_string(line_no) +
                                 ": expected 3 columns");
    Prediction p;
    p.sentence_id = tsv::unescape(fields[0]);
    if (fields[1] == "0")
      p.label = 0;
    else if (fields[1] == "1")
      p.label = 1;
    else
      throw validation_error("BadLabel", path.string() + ":" + std::to_string(line_no) +
                                             ": predicted_label must be 0 or 1");
    try {
      p.p_metaphor = std::stod(fields[2]);
    } catch (const std::exception&) {
      throw validation_error("BadProbability",
                             path.string() + ":" + std::to_string(line_no) +
                                 ": p_metaphor is not a number");
    }
    preds.push_back(std::move(p));
  }
  if (in.bad()) throw io_error("FileRead", "read failure on " + path.string());
  if (!header_seen)
    throw validation_error("MissingColumn", path.string() + ": missing header row");
  return preds;
}

void write_metrics_report(const MetricsReport& report,
                          const std::filesystem::path& path,
                          const std::string& provenance) {
  std::ofstream out(path);
  if (!out) throw io_error("FileOpen", "cannot write " + path.string());
  if (!provenance.empty()) out << "# " << provenance << '\n';
  out << "metric\tprecision\trecall\tf1\n";
  out << "overall\t" << fmt6(report.precision) << '\t' << fmt6(report.recall) << '\t'
      << fmt6(report.f1) << '\n';
  for (const auto& s : report.per_seed)
    out << "seed:" << s.seed << '\t' << fmt6(s.precision) << '\t' << fmt6(s.recall)
        << '\t' << fmt6(s.f1) << '\n';
  for (const auto& [tag, m] : report.per_pos)
    out << "pos:" << to_string(tag) << '\t' << fmt6(m.precision) << '\t'
        << fmt6(m.recall) << '\t' << fmt6(m.f1) << '\n';
  if (!out) throw io_error("FileWrite", "write failure on " + path.string());
}

std::vector<SeedMetrics> read_seed_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("FileOpen", "cannot open " + path.string());
  std::vector<SeedMetrics> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("seed:", 0) != 0) continue;
    auto fields = tsv::split(line);
    if (fields.size() != 4)
      throw validation_error("MissingColumn",
                             path.string() + ": malformed seed row '" + line + "'");
    SeedMetrics s;
    try {
      s.seed = std::stoi(fields[0].substr(5));
      s.precision = std::stod(fields[1]);
      s.recall = std::stod(fields[2]);
      s.f1 = std::stod(fields[3]);
    } catch (const std::exception&) {
      throw validation_error("BadMetricsRow",
                             path.string() + ": malformed seed row '" + line + "'");
    }
    out.push_back(s);
  }
  if (in.bad()) throw io_error("FileRead", "read failure on " + path.string());
  return out;
}

}  // namespace metdet
