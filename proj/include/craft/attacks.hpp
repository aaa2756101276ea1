#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "craft/benchmark.hpp"
#include "craft/geometry.hpp"
#include "craft/image.hpp"
#include "craft/toy_model.hpp"

namespace craft {

enum class NegativeStrategy { None, SourceOnly, AllOthers };
enum class NegativeAggregation { Mean, Max };
enum class BoxSource { GroundTruth, CleanDetection };
/// Descend steps against the loss gradient; Ascend applies the sign as printed
/// in the original update rule (kept for comparison runs).
enum class StepDirection { Descend, Ascend };
enum class TlmTask { IC, OD, RC, OL };

std::string to_string(NegativeStrategy s);
std::string to_string(NegativeAggregation a);
std::string to_string(BoxSource b);
std::string to_string(StepDirection d);
std::string to_string(TlmTask t);

struct AttackConfig {
    double epsilon = 16.0 / 255.0;
    double alpha = 4.0 / 255.0;
    int iterations = 100;
    double tau = 0.9;
    NegativeStrategy negatives = NegativeStrategy::AllOthers;
    NegativeAggregation aggregation = NegativeAggregation::Mean;
    bool use_rtl = true;
    BoxSource box_source = BoxSource::GroundTruth;
    StepDirection direction = StepDirection::Descend;
    /// Margin below the detection threshold targeted by the OD surrogate's suppression term.
    double suppression_margin = 0.1;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument unless 0 <= alpha <= epsilon <= 1, iterations >= 1, tau in [0, 2].
    void validate() const;
};

nlohmann::ordered_json to_json(const AttackConfig& cfg);
AttackConfig attack_config_from_json(const nlohmann::json& j);

struct AttackResult {
    std::string method;
    Image adversarial;
    Image perturbation;
    /// Loss before each update, one entry per iteration.
    std::vector<double> loss_trace;
    int iterations = 0;
    /// Token region the similarities below are pooled over.
    TokenRect region;
    double initial_target_sim = 0.0;
    double final_target_sim = 0.0;
    /// Mean cosine of the pooled region to every non-target category.
    double final_negative_sim = 0.0;
};

/// Called after every PGD update with the 1-based iteration index.
using IterationObserver = std::function<void(int, const Image&)>;

/// max(0, agg_neg - cos(pooled, pos) + tau); agg_neg is 0 when negatives is empty.
/// Throws std::invalid_argument on zero-norm vectors.
double contrastive_loss(std::span<const double> pooled, std::span<const double> positive,
                        const std::vector<std::span<const double>>& negatives, double tau,
                        NegativeAggregation aggregation = NegativeAggregation::Mean);

/// Contrastive hinge on the mean-pooled features of a token region.
class ContrastiveRegionLoss : public FeatureLoss {
public:
    ContrastiveRegionLoss(TokenRect region, std::vector<double> positive, std::vector<std::vector<double>> negatives,
                          double tau, NegativeAggregation aggregation);
    BoolGrid support(int rows, int cols) const override;
    double evaluate(const TokenFeatureGrid& feats, TokenFeatureGrid* grad) const override;

private:
    TokenRect region_;
    std::vector<double> positive_;
    std::vector<std::vector<double>> negatives_;
    double tau_;
    NegativeAggregation aggregation_;
};

/// -cos(mean of all token features, target embedding).
class GlobalTextMatchLoss : public FeatureLoss {
public:
    explicit GlobalTextMatchLoss(std::vector<double> target);
    double evaluate(const TokenFeatureGrid& feats, TokenFeatureGrid* grad) const override;

private:
    std::vector<double> target_;
};

/// Squared distance between the mean token feature and a fixed reference feature.
class FeatureMatchLoss : public FeatureLoss {
public:
    explicit FeatureMatchLoss(std::vector<double> reference_mean);
    double evaluate(const TokenFeatureGrid& feats, TokenFeatureGrid* grad) const override;

private:
    std::vector<double> reference_;
};

/// Captioning surrogate: -max_k cos(f_k, target) + max_k cos(f_k, source).
class TlmCaptionLoss : public FeatureLoss {
public:
    TlmCaptionLoss(std::vector<double> source, std::vector<double> target);
    double evaluate(const TokenFeatureGrid& feats, TokenFeatureGrid* grad) const override;

private:
    std::vector<double> source_;
    std::vector<double> target_;
};

/// Region-classification surrogate: -cos(pooled, E_target) + max_{c != target} cos(pooled, E_c).
/// With a non-empty suppression source it adds the detection term
/// mean_{k in region} max(0, cos(f_k, E_source) - floor).
class TlmRegionLoss : public FeatureLoss {
public:
    TlmRegionLoss(TokenRect region, int target, std::vector<std::vector<double>> embeddings);
    TlmRegionLoss(TokenRect region, int target, std::vector<std::vector<double>> embeddings, int suppress,
                  double floor);
    BoolGrid support(int rows, int cols) const override;
    double evaluate(const TokenFeatureGrid& feats, TokenFeatureGrid* grad) const override;

private:
    TokenRect region_;
    int target_;
    std::vector<std::vector<double>> embeddings_;
    int suppress_ = -1;
    double floor_ = 0.0;
};

/// Localization surrogate: -mean_{k in region} cos(f_k, E_t) + max_{k outside} cos(f_k, E_t).
class TlmLocalizationLoss : public FeatureLoss {
public:
    TlmLocalizationLoss(TokenRect region, std::vector<double> target);
    double evaluate(const TokenFeatureGrid& feats, TokenFeatureGrid* grad) const override;

private:
    TokenRect region_;
    std::vector<double> target_;
};

/// Signed-gradient PGD from delta = 0 with projection onto the eps-ball and [0,1].
AttackResult run_pgd(const Model& model, const Image& clean, const FeatureLoss& loss, const AttackConfig& cfg,
                     const IterationObserver& observer = {});

/// Attack box in source coordinates: ground truth, or the best clean detection of the source category.
BBox attack_box(const Model& model, const Image& clean, const Sample& sample, BoxSource source);

/// Token region attacked by CRAFT for this sample and config.
TokenRect craft_region(const Model& model, const Image& clean, const Sample& sample, const AttackConfig& cfg);

std::unique_ptr<FeatureLoss> make_craft_loss(const Model& model, const Sample& sample, const TokenRect& region,
                                             const AttackConfig& cfg);
std::unique_ptr<FeatureLoss> make_tlm_loss(const Model& model, const Sample& sample, TlmTask task,
                                           const AttackConfig& cfg);

AttackResult craft_attack(const Model& model, const Image& img, const Sample& sample, const AttackConfig& cfg,
                          const IterationObserver& observer = {});
AttackResult feature_match_text_attack(const Model& model, const Image& img, const Sample& sample,
                                       const AttackConfig& cfg, const IterationObserver& observer = {});
AttackResult feature_match_image_attack(const Model& model, const Image& img, const Sample& sample,
                                        const Image& target_img, const AttackConfig& cfg,
                                        const IterationObserver& observer = {});
AttackResult tlm_attack(const Model& model, const Image& img, const Sample& sample, TlmTask task,
                        const AttackConfig& cfg, const IterationObserver& observer = {});

enum class Method { None, Craft, MfIt, MfIi, TlmIc, TlmOd, TlmRc, TlmOl };

std::string to_string(Method m);
/// Accepts the CLI spellings: none, craft, mfit, mfii, tlm-ic, tlm-od, tlm-rc, tlm-ol.
std::optional<Method> parse_method(std::string_view name);

/// Dispatches to the attack named by `method`; Method::None returns the clean image unchanged.
AttackResult run_attack(Method method, const Model& model, const Image& img, const Sample& sample,
                        const GeneratorConfig& gen, const AttackConfig& cfg, const IterationObserver& observer = {});

/// Synthesized scene featuring the sample's target category; reference for the image feature-match baseline.
Image target_reference_image(const Model& model, const Sample& sample, const GeneratorConfig& gen);

}  // namespace craft
