#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "craft/geometry.hpp"
#include "craft/image.hpp"
#include "craft/toy_model.hpp"

namespace craft {

class BenchmarkError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ChangePair {
    std::string source;
    std::string target;
    std::string supercategory;

    friend bool operator==(const ChangePair&, const ChangePair&) = default;
};

inline constexpr const char* kChangePairVersion = "crossvlad-pairs-79/v1";

/// The bundled 79-pair table, checked against its expected per-supercategory counts.
std::vector<ChangePair> load_change_pairs();

/// Pairs from a JSON array of {source, target, supercategory}. Names must resolve in `categories`.
std::vector<ChangePair> parse_change_pairs(const nlohmann::json& j, const std::vector<CategoryInfo>& categories);

/// Distinct categories of a pair table in first-appearance order.
std::vector<CategoryInfo> categories_from_pairs(const std::vector<ChangePair>& pairs);

/// Distinct supercategories in first-appearance order.
std::vector<std::string> supercategories(const std::vector<ChangePair>& pairs);

/// Category universe of the benchmark (derived from the bundled table).
std::vector<CategoryInfo> benchmark_categories();

struct GeneratorConfig {
    ModelConfig model;
    /// Annotation frame; boxes are stored in these coordinates.
    double source_width = 640.0;
    double source_height = 480.0;
    double noise_sigma = 0.01;
    double background_max = 1.0;
    int min_distractors = 0;
    int max_distractors = 4;
    double min_area_fraction = 0.10;
    double max_area_fraction = 0.50;
    int max_placement_attempts = 500;
    std::uint64_t master_seed = 0;

    void validate() const;
};

nlohmann::ordered_json to_json(const GeneratorConfig& cfg);
GeneratorConfig generator_config_from_json(const nlohmann::json& j);

struct Sample {
    std::string id;
    std::string image_path;
    double width = 0.0;
    double height = 0.0;
    BBox bbox;
    std::string source;
    std::string target;
    std::vector<std::string> caption_categories;
    std::uint64_t seed = 0;

    friend bool operator==(const Sample&, const Sample&) = default;
};

struct Scene {
    Sample sample;
    Image image;
};

/// One synthetic scene for a change pair: noise background, the source object
/// as its repeated prototype tile, and up to four distractors.
Scene synthesize_scene(const ChangePair& pair, const Model& model, const GeneratorConfig& cfg, std::uint64_t seed);

/// Names of every broken sample rule; empty when the sample is valid.
std::vector<std::string> validate_sample(const Sample& s, const Image& img, const Model& model,
                                         const GeneratorConfig& cfg = {});

struct Dataset {
    GeneratorConfig generator;
    int n_per_pair = 0;
    std::string change_pair_version = kChangePairVersion;
    std::vector<ChangePair> pairs;
    std::vector<Sample> samples;
    std::vector<Image> images;
};

Dataset generate_dataset(int n_per_pair, const GeneratorConfig& cfg, const std::vector<ChangePair>& pairs,
                         int jobs = 1);

/// Model the dataset was generated against.
Model dataset_model(const Dataset& ds);

std::string dataset_json(const Dataset& ds);

/// Writes dataset.json plus images/<id>.cvf (authoritative) and images/<id>.ppm.
void write_dataset(const std::filesystem::path& dir, const Dataset& ds);

/// Reads dataset.json (or a directory containing it) and every referenced image.
Dataset read_dataset(const std::filesystem::path& path);

std::filesystem::path dataset_json_path(const std::filesystem::path& path);

const ChangePair* find_pair(const std::vector<ChangePair>& pairs, const std::string& source, const std::string& target);

}  // namespace craft
