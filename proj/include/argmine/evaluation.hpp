#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "argmine/labels.hpp"
#include "argmine/markers.hpp"

namespace argmine {

struct ClassScore {
  std::string name;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  double precision() const;
  double recall() const;
  double f1() const;
};

/// Exact-span match scores, accumulated over any number of sequences.
struct SpanMatchReport {
  std::vector<ClassScore> classes;  // one per component type
  std::size_t tokens_correct = 0;
  std::size_t tokens_total = 0;

  explicit SpanMatchReport(const LabelSchema& schema);
  SpanMatchReport() = default;

  /// Adds one (gold, pred) pair. Predictions are repaired before spans are
  /// read, so a span opened by I-x counts like one opened by B-x.
  void add(const BioSequence& gold, const BioSequence& pred);
  void merge(const SpanMatchReport& other);

  std::size_t tp() const;
  std::size_t fp() const;
  std::size_t fn() const;
  /// 2TP / (2TP + FP + FN) over pooled counts.
  double micro_f1() const;
  double token_accuracy() const;
};

SpanMatchReport exact_span_scores(const BioSequence& gold, const BioSequence& pred,
                                  const LabelSchema& schema);

struct RelationReport {
  std::vector<ClassScore> classes;
  std::size_t correct = 0;
  std::size_t total = 0;

  double micro_f1() const;
  double weighted_f1() const;
};

/// Gold and predicted class indices for the same edge list.
RelationReport relation_scores(const std::vector<int>& gold, const std::vector<int>& pred,
                               const LabelSchema& schema);
/// Same, with coarse class names.
RelationReport relation_scores(const std::vector<std::string>& gold,
                               const std::vector<std::string>& pred, const LabelSchema& schema);

// --- error analyses ------------------------------------------------------------

enum class DistanceUnit : std::uint8_t { Tokens, Components, Posts };

std::string_view unit_name(DistanceUnit u);
DistanceUnit parse_unit(std::string_view name);

struct DistanceBin {
  std::size_t lo = 0;
  std::size_t hi = std::numeric_limits<std::size_t>::max();  // exclusive
  std::size_t total = 0;
  std::size_t wrong = 0;

  double error_rate() const { return total == 0 ? 0.0 : static_cast<double>(wrong) / total; }
  std::string label() const;
};

std::vector<DistanceBin> default_distance_bins();

/// One scored relation instance.
struct EdgePrediction {
  const LabeledThread* thread = nullptr;
  std::string source_id;
  std::string target_id;
  int gold = 0;
  int pred = 0;
};

struct DistanceProfile {
  DistanceUnit unit = DistanceUnit::Tokens;
  std::vector<DistanceBin> bins;
  std::size_t unresolved = 0;
};

/// Distance between the end of the earlier component and the start of
/// the later one: token gap, number of components strictly between them,
/// or number of post boundaries crossed.
std::size_t component_distance(const LabeledThread& thread, const ComponentSpan& a,
                               const ComponentSpan& b, DistanceUnit unit);

DistanceProfile distance_error_profile(const std::vector<EdgePrediction>& edges,
                                       std::vector<DistanceBin> bins,
                                       DistanceUnit unit = DistanceUnit::Tokens);

struct VicinitySplit {
  std::vector<std::size_t> near;  // component indices
  std::vector<std::size_t> far;
};

/// A component is near when a marker match intersects
/// [start - window, start + window) or [end - window, end + window).
VicinitySplit marker_vicinity_split(const LabeledThread& thread,
                                    const std::vector<MarkerMatch>& matches,
                                    std::size_t window = 5);

struct VicinityReport {
  SpanMatchReport near;
  SpanMatchReport far;
  std::size_t near_count = 0;
  std::size_t far_count = 0;
};

/// Gold components are partitioned by vicinity. A predicted span goes to
/// the partition of the gold span it matches exactly, otherwise to the
/// partition given by its own vicinity. Token counts stay empty.
VicinityReport marker_vicinity_report(const std::vector<LabeledThread>& threads,
                                      const std::vector<BioSequence>& predictions,
                                      const MarkerLexicon& lexicon, std::size_t window = 5);

// --- rendering -------------------------------------------------------------------

void write_span_table(std::ostream& out, const SpanMatchReport& r, const std::string& title);
void write_relation_table(std::ostream& out, const RelationReport& r, const std::string& title);
void write_distance_table(std::ostream& out, const DistanceProfile& p);

struct CurveSeries {
  std::string name;
  std::vector<double> mean;
  std::vector<double> stddev;
};

/// F1-vs-epoch curves with a +-1 standard deviation band, as an SVG document.
void write_epoch_plot_svg(std::ostream& out, const std::vector<CurveSeries>& series,
                          const std::string& title);

}  // namespace argmine
