#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "craft/attacks.hpp"
#include "craft/benchmark.hpp"
#include "craft/toy_model.hpp"

namespace craft {

struct EvalConfig {
    double theta_box = 0.6;
    double theta_loc = 0.6;

    void validate() const;
};

nlohmann::ordered_json to_json(const EvalConfig& cfg);

struct SuccessVector {
    bool cap = false;
    bool det = false;
    bool reg = false;
    bool loc = false;

    int count() const { return int{cap} + int{det} + int{reg} + int{loc}; }
    bool all() const { return cap && det && reg && loc; }
    friend bool operator==(const SuccessVector&, const SuccessVector&) = default;
};

bool success_caption(const CaptionOutput& caption, int source, int target);
/// Some detection labelled `target` overlaps the source box with IoU strictly above theta_box.
bool success_detection(const std::vector<Detection>& detections, const BBox& source_box, int source, int target,
                       double theta_box);
bool success_region(int label, int target);
bool success_localization(const std::optional<BBox>& loc_box, const BBox& source_box, double theta_loc);

/// All four heads read the same adversarial image; localization queries the target category.
SuccessVector evaluate_sample(const Model& model, const Image& adv, const Sample& sample, const EvalConfig& cfg);

struct SampleTag {
    std::string source;
    std::string target;
    std::string source_super;
    std::string target_super;
};

struct PairStats {
    std::string source;
    std::string target;
    int n = 0;
    int all_four = 0;
    double ctsr4 = 0.0;
};

struct Heatmap {
    std::vector<std::string> labels;
    /// labels.size()^2, row = source supercategory, column = target; NaN for empty cells.
    std::vector<double> matrix;
};

struct MetricsReport {
    int n = 0;
    double ic = 0.0;
    double od = 0.0;
    double rc = 0.0;
    double ol = 0.0;
    double avg = 0.0;
    double ctsr4 = 0.0;
    double ctsr3 = 0.0;
    std::vector<PairStats> per_pair;
    Heatmap heatmap;
};

/// Rates, cross-task success (all four / at least three), per-pair counts, and
/// the supercategory CTSR-4 heatmap. Heatmap labels default to the tags'
/// supercategories in first-appearance order. Throws on empty input.
MetricsReport compute_metrics(std::span<const SuccessVector> vectors, std::span<const SampleTag> tags,
                              const std::vector<std::string>& heatmap_labels = {});

nlohmann::ordered_json to_json(const MetricsReport& r);
std::string heatmap_csv(const MetricsReport& r);
/// Plain-text row: IC OD RC OL avg CTSR-4 CTSR-3.
std::string format_table(const std::vector<std::pair<std::string, MetricsReport>>& rows);

std::vector<SampleTag> sample_tags(const Dataset& ds, const Model& model);

/// Invoked after every PGD update of sample `index`; must be thread-safe when jobs > 1.
using BatchObserver = std::function<void(std::size_t index, int iteration, const Image& adv)>;

struct BatchRun {
    std::vector<AttackResult> results;
    std::vector<SuccessVector> success;
    MetricsReport report;
    double seconds = 0.0;
};

/// Attacks and evaluates every sample of the dataset.
BatchRun attack_and_evaluate(const Model& model, const Dataset& ds, Method method, const AttackConfig& cfg,
                             const EvalConfig& eval, int jobs = 1, const BatchObserver& observer = {},
                             bool keep_results = true);

struct SweepCell {
    double epsilon = 0.0;
    double alpha = 0.0;
    int iterations = 0;
    std::uint64_t seed = 0;
    MetricsReport report;
    double seconds = 0.0;
};

/// Full epsilon x iterations grid of CRAFT runs with alpha = epsilon / 4.
std::vector<SweepCell> run_sweep(const Model& model, const Dataset& ds, const AttackConfig& base,
                                 const std::vector<double>& epsilons, const std::vector<int>& iterations,
                                 const EvalConfig& eval, int jobs = 1);

struct AblationCell {
    bool use_rtl = false;
    NegativeStrategy negatives = NegativeStrategy::None;
    MetricsReport report;
    double seconds = 0.0;
};

/// Six CRAFT variants: {without, with} region tokens x {none, source, all others} negatives, in that order.
std::vector<AblationCell> run_ablation(const Model& model, const Dataset& ds, const AttackConfig& base,
                                       const EvalConfig& eval, int jobs = 1);

std::string sweep_csv(const std::vector<SweepCell>& cells);
std::string ablation_csv(const std::vector<AblationCell>& cells);

}  // namespace craft
