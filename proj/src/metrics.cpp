#include "rs2g/metrics.hpp"

#include <charconv>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include <json.hpp>

namespace rs2g {

std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string EvalReport::to_json() const {
  nlohmann::json j = {{"accuracy", accuracy},
                      {"mcc", mcc},
                      {"auc", auc},
                      {"counts",
                       {{"tp", counts.tp},
                        {"tn", counts.tn},
                        {"fp", counts.fp},
                        {"fn", counts.fn}}},
                      {"train_domain", train_domain},
                      {"test_domain", test_domain},
                      {"extractor", extractor},
                      {"spatial", spatial},
                      {"temporal", temporal}};
  return j.dump(2);
}

std::string EvalReport::csv_header() {
  return "extractor,spatial,temporal,train_domain,test_domain,acc,mcc,auc";
}

std::string EvalReport::to_csv_row() const {
  return extractor + "," + spatial + "," + temporal + "," + train_domain +
         "," + test_domain + "," + format_double(accuracy) + "," +
         format_double(mcc) + "," + format_double(auc);
}

EvalReport compute_metrics(const std::vector<int>& labels,
                           const std::vector<double>& scores) {
  if (labels.empty() || labels.size() != scores.size()) {
    throw std::invalid_argument("compute_metrics: needs matching, non-empty "
                                "label and score lists");
  }
  for (double s : scores) {
    if (!(s >= 0.0 && s <= 1.0)) {
      throw std::invalid_argument("compute_metrics: score " +
                                  std::to_string(s) + " outside [0,1]");
    }
  }

  EvalReport report;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int predicted = scores[i] >= 0.5 ? 1 : 0;
    if (labels[i] == 1) {
      (predicted == 1 ? report.counts.tp : report.counts.fn) += 1;
    } else {
      (predicted == 1 ? report.counts.fp : report.counts.tn) += 1;
    }
  }
  const auto& c = report.counts;
  report.accuracy =
      static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());

  const double d1 = static_cast<double>(c.tp + c.fp);
  const double d2 = static_cast<double>(c.tp + c.fn);
  const double d3 = static_cast<double>(c.tn + c.fp);
  const double d4 = static_cast<double>(c.tn + c.fn);
  if (d1 == 0.0 || d2 == 0.0 || d3 == 0.0 || d4 == 0.0) {
    report.mcc = 0.0;
  } else {
    report.mcc = (static_cast<double>(c.tp) * c.tn -
                  static_cast<double>(c.fp) * c.fn) /
                 std::sqrt(d1 * d2 * d3 * d4);
  }

  // Exact pair counting: P(score_pos > score_neg), ties 0.5.
  double wins = 0.0;
  long pairs = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) {
        wins += 1.0;
      } else if (scores[i] == scores[j]) {
        wins += 0.5;
      }
    }
  }
  report.auc = pairs > 0 ? wins / static_cast<double>(pairs) : 0.5;
  return report;
}

EvalReport evaluate(const ModelBundle& model, const Dataset& test_set) {
  if (test_set.sequences.empty()) {
    throw std::invalid_argument("evaluate: empty test set");
  }
  std::vector<int> labels;
  std::vector<double> scores;
  labels.reserve(test_set.sequences.size());
  scores.reserve(test_set.sequences.size());
  for (const auto& seq : test_set.sequences) {
    labels.push_back(seq.label);
    scores.push_back(model.assess(seq).p_risky);
  }
  EvalReport report = compute_metrics(labels, scores);
  report.train_domain = model.train_domain;
  report.test_domain = test_set.sequences.front().domain_tag;
  report.extractor = to_string(model.config().extractor);
  report.spatial = to_string(model.config().spatial);
  report.temporal = to_string(model.config().temporal);
  return report;
}

EvalReport run_transfer(const ModelBundle& model, const Dataset& test_set) {
  EvalReport report = evaluate(model, test_set);
  if (!report.train_domain.empty() &&
      report.train_domain == report.test_domain) {
    std::cerr << "warning: transfer evaluation with matching domains ('"
              << report.train_domain << "')\n";
  }
  return report;
}

}  // namespace rs2g
