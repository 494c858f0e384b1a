#pragma once

#include <string>
#include <vector>

#include "rs2g/pipeline.hpp"
#include "rs2g/scene.hpp"

namespace rs2g {

struct ConfusionCounts {
  long tp = 0, tn = 0, fp = 0, fn = 0;
  long total() const { return tp + tn + fp + fn; }
};

struct EvalReport {
  double accuracy = 0.0;
  double mcc = 0.0;
  double auc = 0.0;
  ConfusionCounts counts;
  std::string train_domain, test_domain;
  std::string extractor, spatial, temporal;

  std::string to_json() const;
  static std::string csv_header();
  std::string to_csv_row() const;
};

// Decisions use score >= 0.5 (the risky-probability tie admits the risky
// class). MCC falls back to 0 when any denominator factor is 0; AUC is
// exact pair counting with ties worth 0.5.
EvalReport compute_metrics(const std::vector<int>& labels,
                           const std::vector<double>& scores);

EvalReport evaluate(const ModelBundle& model, const Dataset& test_set);

// Plain evaluation on a shifted domain; no adaptation. Warns on stderr when
// the domains match.
EvalReport run_transfer(const ModelBundle& model, const Dataset& test_set);

// Locale-independent shortest round-trip formatting ('.' decimal point).
std::string format_double(double value);

}  // namespace rs2g
