#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "ada/common.hpp"
#include "ada/pool.hpp"

namespace ada {

enum class Architecture { Linear, OneHidden };

struct ArchitectureSpec {
    Architecture kind = Architecture::OneHidden;
    int hidden_units = 16;

    bool operator==(const ArchitectureSpec&) const = default;
};

std::string_view to_string(Architecture a);
Architecture parse_architecture(std::string_view name);

struct TrainSpec {
    double learning_rate = 0.1;
    int epochs = 30;
    int batch_size = 32;
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const TrainSpec&) const = default;
};

struct LabeledData {
    std::vector<Vector> x;
    std::vector<ClassId> y;

    std::size_t size() const { return x.size(); }
    void append(const Vector& features, ClassId label) {
        x.push_back(features);
        y.push_back(label);
    }
};

/// Softmax classifier, optionally with one tanh hidden layer whose
/// activations serve as the extracted feature. Parameters live in one flat
/// vector: Linear `W[C x d], b[C]`; OneHidden `W1[h x d], b1[h], W2[C x h], b2[C]`.
class Classifier {
public:
    Classifier() = default;
    /// All-zero parameters.
    Classifier(ArchitectureSpec arch, int feature_dim, int class_count);
    /// Small random weights drawn from `seed`, zero biases.
    static Classifier initialized(ArchitectureSpec arch, int feature_dim, int class_count,
                                  std::uint64_t seed);

    const ArchitectureSpec& architecture() const { return arch_; }
    int feature_dim() const { return feature_dim_; }
    int class_count() const { return class_count_; }
    int embedding_dim() const;

    std::span<const double> parameters() const { return params_; }
    std::span<double> parameters() { return params_; }
    static std::size_t parameter_count(ArchitectureSpec arch, int feature_dim, int class_count);

    Vector logits(std::span<const double> x) const;
    Vector predict_proba(std::span<const double> x) const;
    /// Identity for Linear, hidden activations for OneHidden.
    Vector extract_feature(std::span<const double> x) const;
    ClassId predict(std::span<const double> x) const;

    /// Mean cross-entropy over the listed rows (all rows when `rows` is empty);
    /// `grad` is resized to parameter_count() and overwritten.
    double loss_and_gradient(const LabeledData& data, std::span<const std::size_t> rows,
                             Vector& grad) const;
    double loss(const LabeledData& data) const;

private:
    void check_input(std::span<const double> x) const;

    ArchitectureSpec arch_{};
    int feature_dim_ = 0;
    int class_count_ = 0;
    Vector params_;
};

/// Mini-batch gradient descent without momentum. Returns the mean batch loss per epoch.
std::vector<double> train(Classifier& model, const LabeledData& data, const TrainSpec& spec);

LabeledData source_training_data(const DomainPool& source);
/// Source samples plus every sample of a labeled target region.
LabeledData union_training_data(const DomainPool& source, const DomainPool& target);

Classifier warmup(const DomainPool& source, ArchitectureSpec arch, const TrainSpec& spec);
void finetune(Classifier& model, const DomainPool& source, const DomainPool& target,
              const TrainSpec& spec);

struct EvalMetrics {
    std::vector<double> iou;        // NaN where the class never occurs in truth or prediction
    std::vector<std::int64_t> tp, fp, fn;
    double miou = 0.0;
    double accuracy = 0.0;
};

EvalMetrics evaluate_predictions(std::span<const ClassId> truth, std::span<const ClassId> predicted,
                                 int class_count);
EvalMetrics evaluate(const Classifier& model, const DomainPool& eval_pool);

// Checkpoint: 16-byte header (u32 magic "ADAC", u16 version, u16 hidden units
// with 0 meaning Linear, u32 d, u32 C) followed by the flat parameters as
// little-endian f64.
inline constexpr std::uint32_t CHECKPOINT_MAGIC = 0x43414441;  // "ADAC"
inline constexpr std::uint16_t CHECKPOINT_VERSION = 1;

void save_checkpoint(std::ostream& out, const Classifier& model);
Classifier load_checkpoint(std::istream& in);

}  // namespace ada
