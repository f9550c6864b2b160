#include "flowembed/stpcn.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

namespace flowembed {

using nn::Tensor;

std::vector<Tensor> StpcnModel::parameters() const {
    return {temporal.conv1_w, temporal.conv1_b, temporal.conv2_w, temporal.conv2_b,
            temporal.fc_w,    temporal.fc_b,    spatial.conv1_w,  spatial.conv1_b,
            spatial.conv2_w,  spatial.conv2_b,  spatial.fc_w,     spatial.fc_b,
            head};
}

namespace {

constexpr size_t kC1 = 8, kC2 = 16, kK = 3, kBranchOut = 32;

Tensor init_param(std::vector<size_t> shape, size_t fan_in, std::mt19937_64& rng) {
    double bound = std::sqrt(1.0 / double(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    size_t n = 1;
    for (size_t d : shape) n *= d;
    std::vector<double> data(n);
    for (double& x : data) x = dist(rng);
    return Tensor::from_data(std::move(shape), std::move(data), true);
}

StpcnModel::Branch init_branch(std::mt19937_64& rng) {
    StpcnModel::Branch b;
    b.conv1_w = init_param({kC1, 1, kK, kK}, kK * kK, rng);
    b.conv1_b = init_param({kC1}, kK * kK, rng);
    b.conv2_w = init_param({kC2, kC1, kK, kK}, kC1 * kK * kK, rng);
    b.conv2_b = init_param({kC2}, kC1 * kK * kK, rng);
    b.fc_w = init_param({kBranchOut, kC2}, kC2, rng);
    b.fc_b = init_param({kBranchOut}, kC2, rng);
    return b;
}

Tensor branch_forward(const StpcnModel::Branch& b, const Tensor& input) {
    Tensor x = nn::relu(nn::bias_channels(nn::conv2d(input, b.conv1_w, 1, 1), b.conv1_b));
    x = nn::max_pool2d(x, 2, 2);
    x = nn::relu(nn::bias_channels(nn::conv2d(x, b.conv2_w, 1, 1), b.conv2_b));
    Tensor pooled = nn::global_avg_pool(x);
    return nn::dense(pooled, b.fc_w, b.fc_b);
}

void renormalize_head_rows(Tensor& head) {
    auto& v = head.mutable_value();
    size_t rows = head.shape()[0], d = head.shape()[1];
    for (size_t r = 0; r < rows; ++r) {
        double sq = 0.0;
        for (size_t i = 0; i < d; ++i) sq += v[r * d + i] * v[r * d + i];
        if (sq == 0.0) throw ZeroVectorError("head row collapsed to zero");
        double inv = 1.0 / std::sqrt(sq);
        for (size_t i = 0; i < d; ++i) v[r * d + i] *= inv;
    }
}

void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("truncated model file");
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 |
           uint32_t(b[3]) << 24;
}

void put_f64(std::ostream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

double get_f64(std::istream& in) {
    double v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
        throw FormatError("truncated model file");
    return v;
}

void put_string(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
    uint32_t len = get_u32(in);
    std::string s(len, '\0');
    if (len && !in.read(s.data(), len)) throw FormatError("truncated model file");
    return s;
}

void put_tensor(std::ostream& out, const Tensor& t) {
    put_u32(out, static_cast<uint32_t>(t.shape().size()));
    for (size_t d : t.shape()) put_u32(out, static_cast<uint32_t>(d));
    out.write(reinterpret_cast<const char*>(t.value().data()),
              static_cast<std::streamsize>(t.value().size() * sizeof(double)));
}

Tensor get_tensor(std::istream& in) {
    uint32_t ndim = get_u32(in);
    if (ndim > 4) throw FormatError("model tensor rank out of range");
    std::vector<size_t> shape(ndim);
    size_t n = 1;
    for (auto& d : shape) {
        d = get_u32(in);
        n *= d;
    }
    std::vector<double> data(n);
    if (!in.read(reinterpret_cast<char*>(data.data()),
                 static_cast<std::streamsize>(n * sizeof(double))))
        throw FormatError("truncated model file");
    return Tensor::from_data(std::move(shape), std::move(data), true);
}

constexpr char kModelMagic[] = "STPCNv1";  // 7 bytes on disk

}  // namespace

StpcnModel init_model(size_t gamma, size_t epsilon,
                      const std::vector<std::string>& class_labels,
                      const TrainConfig& cfg) {
    if (class_labels.size() < 2) throw ConfigError("model needs at least 2 classes");
    if (gamma < 2 || epsilon < 2) throw ConfigError("gamma and epsilon must be >= 2");
    if (!(cfg.scale_s > 0)) throw ConfigError("scale_s must be > 0");
    if (!(cfg.margin_m >= 0 && cfg.margin_m < M_PI / 2))
        throw ConfigError("margin_m must lie in [0, pi/2)");

    StpcnModel m;
    m.gamma = gamma;
    m.epsilon = epsilon;
    m.scale_s = cfg.scale_s;
    m.margin_m = cfg.margin_m;
    m.class_labels = class_labels;

    std::mt19937_64 rng(cfg.seed);
    m.temporal = init_branch(rng);
    m.spatial = init_branch(rng);
    m.head = init_param({class_labels.size(), StpcnModel::kEmbedDim},
                        StpcnModel::kEmbedDim, rng);
    renormalize_head_rows(m.head);
    return m;
}

nn::Tensor embed_graph(const StpcnModel& model, const Example& ex) {
    if (ex.F.size() != model.gamma * model.epsilon ||
        ex.A.size() != model.gamma * model.gamma)
        throw ConfigError("example shape does not match model (gamma, epsilon)");
    Tensor f = Tensor::from_data({1, model.gamma, model.epsilon}, ex.F);
    std::vector<double> a_real(ex.A.begin(), ex.A.end());
    Tensor a = Tensor::from_data({1, model.gamma, model.gamma}, std::move(a_real));
    return nn::concat(branch_forward(model.temporal, f),
                      branch_forward(model.spatial, a));
}

std::vector<double> embed(const StpcnModel& model, const Example& ex) {
    return embed_graph(model, ex).value();
}

std::vector<std::vector<double>> embed_all(const StpcnModel& model,
                                           const std::vector<Example>& examples) {
    std::vector<std::vector<double>> out;
    out.reserve(examples.size());
    for (const auto& ex : examples) out.push_back(embed(model, ex));
    return out;
}

nn::Tensor arcface_loss(const nn::Tensor& embeddings, const std::vector<int>& labels,
                        const nn::Tensor& head, double s, double m) {
    if (embeddings.shape().size() != 2 || head.shape().size() != 2 ||
        embeddings.shape()[1] != head.shape()[1])
        throw ShapeError("arcface_loss expects embeddings [n, d], head [C, d]");
    size_t n = embeddings.shape()[0], c = head.shape()[0];
    if (n == 0) throw ConfigError("arcface_loss: empty batch");
    if (labels.size() != n) throw ShapeError("arcface_loss: label count mismatch");
    for (int l : labels)
        if (l < 0 || size_t(l) >= c)
            throw ConfigError("label " + std::to_string(l) + " out of range");

    Tensor cos = nn::clamp(
        nn::matmul_nt(nn::row_l2_normalize(embeddings), nn::row_l2_normalize(head)),
        -1.0 + 1e-7, 1.0 - 1e-7);

    // cos(theta + m) = cos*cos(m) - sin*sin(m), computed elementwise and
    // selected onto the true-class entries with a one-hot mask.
    Tensor sin = nn::sqrt_elem(nn::sub(
        Tensor::from_data({n, c}, std::vector<double>(n * c, 1.0)), nn::mul(cos, cos)));
    Tensor cos_margin =
        nn::sub(nn::scale(cos, std::cos(m)), nn::scale(sin, std::sin(m)));

    std::vector<double> onehot(n * c, 0.0), inv_onehot(n * c, 1.0);
    for (size_t r = 0; r < n; ++r) {
        onehot[r * c + size_t(labels[r])] = 1.0;
        inv_onehot[r * c + size_t(labels[r])] = 0.0;
    }
    Tensor mask = Tensor::from_data({n, c}, std::move(onehot));
    Tensor inv_mask = Tensor::from_data({n, c}, std::move(inv_onehot));

    Tensor logits = nn::scale(
        nn::add(nn::mul(mask, cos_margin), nn::mul(inv_mask, cos)), s);
    return nn::softmax_cross_entropy(logits, labels);
}

StpcnModel train(const std::vector<Example>& examples, const DatasetSplit& split,
                 const TrainConfig& cfg, TrainLog* log) {
    if (split.train.empty()) throw ConfigError("empty training split");
    if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");

    std::set<std::string> class_set;
    for (size_t i : split.train) {
        if (i >= examples.size()) throw ConfigError("split index out of range");
        class_set.insert(examples[i].label);
    }
    if (class_set.size() < 2)
        throw ConfigError("training requires at least 2 classes, got " +
                          std::to_string(class_set.size()));
    if (split.holdout_class && class_set.count(*split.holdout_class))
        throw ConfigError("holdout class '" + *split.holdout_class +
                          "' appears in the training split");

    std::vector<std::string> classes(class_set.begin(), class_set.end());
    std::map<std::string, int> class_id;
    for (size_t i = 0; i < classes.size(); ++i) class_id[classes[i]] = int(i);

    size_t gamma = 0, epsilon = 0;
    {
        const Example& first = examples[split.train.front()];
        gamma = static_cast<size_t>(std::lround(std::sqrt(double(first.A.size()))));
        epsilon = first.F.size() / std::max<size_t>(gamma, 1);
    }

    StpcnModel model = init_model(gamma, epsilon, classes, cfg);
    auto params = model.parameters();
    std::vector<std::vector<double>> velocity(params.size());
    for (size_t p = 0; p < params.size(); ++p)
        velocity[p].assign(params[p].numel(), 0.0);

    std::mt19937_64 rng(cfg.seed);
    std::vector<size_t> order = split.train;
    if (log) log->epoch_mean_loss.clear();

    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        size_t seen = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<Tensor> rows;
            std::vector<int> labels;
            rows.reserve(end - start);
            for (size_t i = start; i < end; ++i) {
                const Example& ex = examples[order[i]];
                rows.push_back(embed_graph(model, ex));
                labels.push_back(class_id.at(ex.label));
            }
            Tensor batch = nn::stack_rows(rows);
            Tensor loss =
                arcface_loss(batch, labels, model.head, cfg.scale_s, cfg.margin_m);
            for (auto& p : params) p.zero_grad();
            nn::backward(loss);

            for (size_t p = 0; p < params.size(); ++p) {
                auto& value = params[p].mutable_value();
                const auto& grad = params[p].grad();
                auto& vel = velocity[p];
                for (size_t i = 0; i < value.size(); ++i) {
                    vel[i] = cfg.momentum * vel[i] - cfg.learning_rate * grad[i];
                    value[i] += vel[i];
                }
            }
            renormalize_head_rows(model.head);

            loss_sum += loss.value()[0] * double(end - start);
            seen += end - start;
        }
        if (log) log->epoch_mean_loss.push_back(loss_sum / double(seen));
    }
    return model;
}

void save_model(const StpcnModel& model, const std::string& path,
                const std::string& config_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write model file: " + path);
    out.write(kModelMagic, 7);
    put_u32(out, static_cast<uint32_t>(model.gamma));
    put_u32(out, static_cast<uint32_t>(model.epsilon));
    put_f64(out, model.scale_s);
    put_f64(out, model.margin_m);
    put_string(out, config_hash);
    put_u32(out, static_cast<uint32_t>(model.class_labels.size()));
    for (const auto& l : model.class_labels) put_string(out, l);
    auto params = model.parameters();
    put_u32(out, static_cast<uint32_t>(params.size()));
    for (const auto& p : params) put_tensor(out, p);
    if (!out) throw FormatError("short write to model file: " + path);
}

StpcnModel load_model(const std::string& path, std::string* config_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open model file: " + path);
    char magic[7];
    if (!in.read(magic, 7)) throw FormatError("truncated model file: " + path);
    bool family_match = true;
    for (size_t i = 0; i < 5; ++i)
        if (std::tolower(static_cast<unsigned char>(magic[i])) != std::tolower("STPCN"[i]))
            family_match = false;
    if (!family_match) throw FormatError("not a model file (bad magic): " + path);
    if (std::memcmp(magic, kModelMagic, 7) != 0)
        throw VersionError("unsupported model version '" + std::string(magic, 7) +
                           "', expected STPCNv1");

    StpcnModel m;
    m.gamma = get_u32(in);
    m.epsilon = get_u32(in);
    m.scale_s = get_f64(in);
    m.margin_m = get_f64(in);
    std::string hash = get_string(in);
    if (config_hash) *config_hash = hash;
    uint32_t n_classes = get_u32(in);
    m.class_labels.resize(n_classes);
    for (auto& l : m.class_labels) l = get_string(in);

    uint32_t n_params = get_u32(in);
    if (n_params != 13) throw FormatError("unexpected parameter count in model file");
    std::vector<Tensor> params(n_params);
    for (auto& p : params) p = get_tensor(in);
    m.temporal = {params[0], params[1], params[2], params[3], params[4], params[5]};
    m.spatial = {params[6], params[7], params[8], params[9], params[10], params[11]};
    m.head = params[12];
    if (m.head.shape() !=
        std::vector<size_t>{m.class_labels.size(), StpcnModel::kEmbedDim})
        throw FormatError("model head shape does not match class labels");
    return m;
}

}  // namespace flowembed
