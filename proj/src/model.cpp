#include "ada/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <string>

namespace ada {
namespace {

void softmax_inplace(Vector& z) {
    const double hi = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (auto& v : z) {
        v = std::exp(v - hi);
        sum += v;
    }
    for (auto& v : z) v /= sum;
}

}  // namespace

std::string_view to_string(Architecture a) {
    return a == Architecture::Linear ? "Linear" : "OneHidden";
}

Architecture parse_architecture(std::string_view name) {
    if (name == "Linear") return Architecture::Linear;
    if (name == "OneHidden") return Architecture::OneHidden;
    throw InvalidInput("unknown architecture '" + std::string(name) + "'");
}

void TrainSpec::validate() const {
    if (!(learning_rate > 0.0)) throw InvalidInput("learning_rate must be positive");
    if (epochs < 0) throw InvalidInput("epochs must be >= 0");
    if (batch_size < 1) throw InvalidInput("batch_size must be >= 1");
}

Classifier::Classifier(ArchitectureSpec arch, int feature_dim, int class_count)
    : arch_(arch), feature_dim_(feature_dim), class_count_(class_count) {
    if (feature_dim < 1 || class_count < 1) throw InvalidInput("Classifier: d and C must be >= 1");
    if (arch.kind == Architecture::OneHidden && arch.hidden_units < 1)
        throw InvalidInput("Classifier: hidden_units must be >= 1");
    params_.assign(parameter_count(arch, feature_dim, class_count), 0.0);
}

Classifier Classifier::initialized(ArchitectureSpec arch, int feature_dim, int class_count,
                                   std::uint64_t seed) {
    Classifier m(arch, feature_dim, class_count);
    std::mt19937_64 rng(seed);
    auto fill = [&](std::size_t offset, std::size_t count, int fan_in, int fan_out) {
        const double scale = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> u(-scale, scale);
        for (std::size_t i = 0; i < count; ++i) m.params_[offset + i] = u(rng);
    };
    const std::size_t d = feature_dim, c = class_count;
    if (arch.kind == Architecture::Linear) {
        fill(0, c * d, feature_dim, class_count);
    } else {
        const std::size_t h = arch.hidden_units;
        fill(0, h * d, feature_dim, arch.hidden_units);
        fill(h * d + h, c * h, arch.hidden_units, class_count);
    }
    return m;
}

int Classifier::embedding_dim() const {
    return arch_.kind == Architecture::Linear ? feature_dim_ : arch_.hidden_units;
}

std::size_t Classifier::parameter_count(ArchitectureSpec arch, int feature_dim, int class_count) {
    const std::size_t d = feature_dim, c = class_count;
    if (arch.kind == Architecture::Linear) return c * d + c;
    const std::size_t h = arch.hidden_units;
    return h * d + h + c * h + c;
}

void Classifier::check_input(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != feature_dim_)
        throw InvalidInput("classifier input dimension mismatch");
}

Vector Classifier::extract_feature(std::span<const double> x) const {
    check_input(x);
    if (arch_.kind == Architecture::Linear) return Vector(x.begin(), x.end());
    const int h = arch_.hidden_units, d = feature_dim_;
    const double* w1 = params_.data();
    const double* b1 = w1 + static_cast<std::size_t>(h) * d;
    Vector hidden(h);
    for (int i = 0; i < h; ++i) {
        double a = b1[i];
        for (int j = 0; j < d; ++j) a += w1[i * d + j] * x[j];
        hidden[i] = std::tanh(a);
    }
    return hidden;
}

Vector Classifier::logits(std::span<const double> x) const {
    const Vector z = extract_feature(x);
    const int in = static_cast<int>(z.size()), c = class_count_;
    const double* w = params_.data();
    if (arch_.kind == Architecture::OneHidden)
        w += static_cast<std::size_t>(arch_.hidden_units) * feature_dim_ + arch_.hidden_units;
    const double* b = w + static_cast<std::size_t>(c) * in;
    Vector out(c);
    for (int k = 0; k < c; ++k) {
        double a = b[k];
        for (int j = 0; j < in; ++j) a += w[k * in + j] * z[j];
        out[k] = a;
    }
    return out;
}

Vector Classifier::predict_proba(std::span<const double> x) const {
    Vector p = logits(x);
    softmax_inplace(p);
    return p;
}

ClassId Classifier::predict(std::span<const double> x) const {
    const Vector p = logits(x);
    return static_cast<ClassId>(argmax(p));
}

double Classifier::loss_and_gradient(const LabeledData& data, std::span<const std::size_t> rows,
                                     Vector& grad) const {
    grad.assign(params_.size(), 0.0);
    const std::size_t n = rows.empty() ? data.size() : rows.size();
    if (n == 0) return 0.0;
    const int d = feature_dim_, c = class_count_;
    const bool hidden_layer = arch_.kind == Architecture::OneHidden;
    const int h = hidden_layer ? arch_.hidden_units : d;
    const std::size_t out_offset = hidden_layer ? static_cast<std::size_t>(h) * d + h : 0;
    const double* w_out = params_.data() + out_offset;
    double* g_w1 = grad.data();
    double* g_b1 = g_w1 + static_cast<std::size_t>(h) * d;
    double* g_wo = grad.data() + out_offset;
    double* g_bo = g_wo + static_cast<std::size_t>(c) * h;

    double total = 0.0;
    Vector dz(h);
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t row = rows.empty() ? r : rows[r];
        const Vector& x = data.x[row];
        const ClassId y = data.y[row];
        if (y < 0 || y >= c) throw InvalidInput("training label out of range");
        const Vector z = extract_feature(x);
        Vector p = logits(x);
        softmax_inplace(p);
        total -= std::log(std::max(p[y], std::numeric_limits<double>::min()));
        p[y] -= 1.0;  // dL/dlogits
        std::fill(dz.begin(), dz.end(), 0.0);
        for (int k = 0; k < c; ++k) {
            g_bo[k] += p[k];
            for (int j = 0; j < h; ++j) {
                g_wo[k * h + j] += p[k] * z[j];
                dz[j] += w_out[k * h + j] * p[k];
            }
        }
        if (hidden_layer) {
            for (int i = 0; i < h; ++i) {
                const double da = dz[i] * (1.0 - z[i] * z[i]);
                g_b1[i] += da;
                for (int j = 0; j < d; ++j) g_w1[i * d + j] += da * x[j];
            }
        }
    }
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& g : grad) g *= inv;
    return total * inv;
}

double Classifier::loss(const LabeledData& data) const {
    Vector grad;
    return loss_and_gradient(data, {}, grad);
}

std::vector<double> train(Classifier& model, const LabeledData& data, const TrainSpec& spec) {
    spec.validate();
    std::vector<double> epoch_loss;
    if (data.size() == 0 || spec.epochs == 0) return epoch_loss;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(spec.seed);
    Vector grad;
    auto params = model.parameters();
    for (int e = 0; e < spec.epochs; ++e) {
        std::shuffle(order.begin(), order.end(), rng);
        double sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += spec.batch_size) {
            const std::size_t len = std::min<std::size_t>(spec.batch_size, order.size() - start);
            sum += model.loss_and_gradient(data, std::span(order).subspan(start, len), grad);
            for (std::size_t i = 0; i < params.size(); ++i) params[i] -= spec.learning_rate * grad[i];
            ++batches;
        }
        epoch_loss.push_back(sum / static_cast<double>(batches));
    }
    return epoch_loss;
}

LabeledData source_training_data(const DomainPool& source) {
    LabeledData data;
    data.x.reserve(source.samples().size());
    data.y.reserve(source.samples().size());
    for (const auto& s : source.samples()) data.append(s.feature, s.true_class);
    return data;
}

LabeledData union_training_data(const DomainPool& source, const DomainPool& target) {
    LabeledData data = source_training_data(source);
    for (const auto& r : target.regions()) {
        if (r.label_state != LabelState::Labeled) continue;
        for (SampleId sid : r.sample_ids) {
            const Sample& s = target.sample(sid);
            data.append(s.feature, s.true_class);
        }
    }
    return data;
}

Classifier warmup(const DomainPool& source, ArchitectureSpec arch, const TrainSpec& spec) {
    if (source.samples().empty()) throw InvalidInput("warmup: empty source pool");
    Classifier model = Classifier::initialized(arch, source.feature_dim(), source.class_count(),
                                               mix_seed(spec.seed, 0x11));
    TrainSpec s = spec;
    s.seed = mix_seed(spec.seed, 0x12);
    train(model, source_training_data(source), s);
    return model;
}

void finetune(Classifier& model, const DomainPool& source, const DomainPool& target,
              const TrainSpec& spec) {
    const LabeledData data = union_training_data(source, target);
    if (data.size() == 0) throw InvalidInput("finetune: no labeled samples");
    train(model, data, spec);
}

EvalMetrics evaluate_predictions(std::span<const ClassId> truth, std::span<const ClassId> predicted,
                                 int class_count) {
    if (truth.size() != predicted.size()) throw InvalidInput("evaluate: length mismatch");
    EvalMetrics m;
    m.tp.assign(class_count, 0);
    m.fp.assign(class_count, 0);
    m.fn.assign(class_count, 0);
    std::int64_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const ClassId t = truth[i], p = predicted[i];
        if (t < 0 || t >= class_count || p < 0 || p >= class_count)
            throw InvalidInput("evaluate: class out of range");
        if (t == p) {
            ++m.tp[t];
            ++correct;
        } else {
            ++m.fp[p];
            ++m.fn[t];
        }
    }
    m.iou.assign(class_count, std::numeric_limits<double>::quiet_NaN());
    double sum = 0.0;
    int counted = 0;
    for (int c = 0; c < class_count; ++c) {
        const std::int64_t denom = m.tp[c] + m.fp[c] + m.fn[c];
        if (denom == 0) continue;
        m.iou[c] = static_cast<double>(m.tp[c]) / static_cast<double>(denom);
        sum += m.iou[c];
        ++counted;
    }
    m.miou = counted > 0 ? sum / counted : 0.0;
    m.accuracy = truth.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(truth.size());
    return m;
}

EvalMetrics evaluate(const Classifier& model, const DomainPool& eval_pool) {
    std::vector<ClassId> truth, pred;
    truth.reserve(eval_pool.samples().size());
    pred.reserve(eval_pool.samples().size());
    for (const auto& s : eval_pool.samples()) {
        truth.push_back(s.true_class);
        pred.push_back(model.predict(s.feature));
    }
    return evaluate_predictions(truth, pred, eval_pool.class_count());
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("checkpoint truncated");
    return v;
}

}  // namespace

void save_checkpoint(std::ostream& out, const Classifier& model) {
    const auto& arch = model.architecture();
    put<std::uint32_t>(out, CHECKPOINT_MAGIC);
    put<std::uint16_t>(out, CHECKPOINT_VERSION);
    put<std::uint16_t>(out, arch.kind == Architecture::Linear
                                ? std::uint16_t{0}
                                : static_cast<std::uint16_t>(arch.hidden_units));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(model.feature_dim()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(model.class_count()));
    for (double v : model.parameters()) put<double>(out, v);
    if (!out) throw IoError("checkpoint write failed");
}

Classifier load_checkpoint(std::istream& in) {
    if (get<std::uint32_t>(in) != CHECKPOINT_MAGIC) throw InvalidInput("not a classifier checkpoint");
    if (get<std::uint16_t>(in) != CHECKPOINT_VERSION)
        throw InvalidInput("unsupported checkpoint version");
    const auto hidden = get<std::uint16_t>(in);
    const auto d = get<std::uint32_t>(in);
    const auto c = get<std::uint32_t>(in);
    ArchitectureSpec arch{hidden == 0 ? Architecture::Linear : Architecture::OneHidden, hidden};
    Classifier model(arch, static_cast<int>(d), static_cast<int>(c));
    for (auto& v : model.parameters()) v = get<double>(in);
    return model;
}

}  // namespace ada
