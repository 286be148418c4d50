#include "ius/net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace ius {

namespace {

constexpr int kWindowExtras[] = {30, 40, 50, 60};

std::mt19937_64 seeded(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
    return std::mt19937_64(seq);
}

Matrix sigmoid(const Matrix& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

}  // namespace

bool is_allowed_window(int w) {
    return (w >= 1 && w <= 24) || std::find(std::begin(kWindowExtras), std::end(kWindowExtras), w) != std::end(kWindowExtras);
}

std::vector<int> allowed_windows() {
    std::vector<int> out(24);
    std::iota(out.begin(), out.end(), 1);
    out.insert(out.end(), std::begin(kWindowExtras), std::end(kWindowExtras));
    return out;
}

void ModelConfig::validate() const {
    if (hidden < 1 || fc < 1) throw Error("hidden and fc sizes must be positive");
    if (fc > hidden) throw Error(fmt::format("fc size {} exceeds hidden size {}", fc, hidden));
    if (!(dropout >= 0.0 && dropout <= 0.5)) throw Error(fmt::format("dropout {} outside [0, 0.5]", dropout));
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw Error(fmt::format("learning rate {} must be finite and non-negative", learning_rate));
    if (batch < 1) throw Error("batch size must be positive");
    if (!is_allowed_window(window)) throw Error(fmt::format("window {} is not an allowed size", window));
    if (epochs < 1) throw Error("epochs must be positive");
    if (patience < 0) throw Error("patience must be non-negative");
}

nlohmann::json config_to_json(const ModelConfig& c) {
    return {{"hidden", c.hidden},   {"fc", c.fc},         {"dropout", c.dropout},   {"learning_rate", c.learning_rate},
            {"batch", c.batch},     {"window", c.window}, {"epochs", c.epochs},     {"patience", c.patience},
            {"seed", c.seed}};
}

ModelConfig config_from_json(const nlohmann::json& doc, ModelConfig base) {
    try {
        base.hidden = doc.value("hidden", base.hidden);
        base.fc = doc.value("fc", base.fc);
        base.dropout = doc.value("dropout", base.dropout);
        base.learning_rate = doc.value("learning_rate", base.learning_rate);
        base.batch = doc.value("batch", base.batch);
        base.window = doc.value("window", base.window);
        base.epochs = doc.value("epochs", base.epochs);
        base.patience = doc.value("patience", base.patience);
        base.seed = doc.value("seed", base.seed);
    } catch (const nlohmann::json::exception& e) {
        throw Error(fmt::format("model config: {}", e.what()));
    }
    base.validate();
    return base;
}

Index LstmParams::parameter_count() const {
    Index n = 0;
    for_each_tensor([&](const std::string&, const Matrix& m) { n += m.size(); });
    return n;
}

LstmParams LstmParams::zeros_like() const {
    LstmParams z = *this;
    z.for_each_tensor([](const std::string&, Matrix& m) { m.setZero(); });
    return z;
}

LstmParams init_params(int input_dim, int hidden, int fc, std::uint64_t seed) {
    if (input_dim < 1 || hidden < 1 || fc < 1) throw Error("network sizes must be positive");
    auto rng = seeded(seed, 1);
    const auto uniform = [&](Index rows, Index cols, double k) {
        std::uniform_real_distribution<double> u(-k, k);
        Matrix m(rows, cols);
        for (Index j = 0; j < cols; ++j)
            for (Index i = 0; i < rows; ++i) m(i, j) = u(rng);
        return m;
    };
    const int H = hidden;
    const double k = 1.0 / std::sqrt(static_cast<double>(H));
    const auto cell = [&](int in) {
        LstmCell c{uniform(4 * H, in, k), uniform(4 * H, H, k), uniform(4 * H, 1, k)};
        c.b.middleRows(H, H).setOnes();
        return c;
    };
    LstmParams p;
    p.input_dim = input_dim;
    p.hidden = H;
    p.fc = fc;
    p.l1_fwd = cell(input_dim);
    p.l1_bwd = cell(input_dim);
    p.l2_fwd = cell(2 * H);
    p.l2_bwd = cell(2 * H);
    const double k_fc = 1.0 / std::sqrt(2.0 * H);
    p.fc_W = uniform(fc, 2 * H, k_fc);
    p.fc_b = uniform(fc, 1, k_fc);
    const double k_out = 1.0 / std::sqrt(static_cast<double>(fc));
    p.out_W = uniform(1, fc, k_out);
    p.out_b = uniform(1, 1, k_out);
    return p;
}

nlohmann::json params_to_json(const LstmParams& p) {
    nlohmann::json tensors = nlohmann::json::array();
    p.for_each_tensor([&](const std::string& name, const Matrix& m) {
        std::vector<double> data(m.data(), m.data() + m.size());
        tensors.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"data", data}});
    });
    return {{"format", "ius.bilstm/1"},
            {"input_dim", p.input_dim},
            {"hidden", p.hidden},
            {"fc", p.fc},
            {"tensors", tensors}};
}

LstmParams params_from_json(const nlohmann::json& doc) {
    if (doc.value("format", std::string{}) != "ius.bilstm/1") throw Error("not an ius.bilstm/1 checkpoint");
    LstmParams p = init_params(doc.at("input_dim").get<int>(), doc.at("hidden").get<int>(), doc.at("fc").get<int>(), 0);
    const auto& tensors = doc.at("tensors");
    std::size_t i = 0;
    p.for_each_tensor([&](const std::string& name, Matrix& m) {
        if (i >= tensors.size()) throw Error(fmt::format("checkpoint is missing tensor '{}'", name));
        const auto& t = tensors[i++];
        if (t.at("name").get<std::string>() != name || t.at("rows").get<Index>() != m.rows() ||
            t.at("cols").get<Index>() != m.cols())
            throw Error(fmt::format("checkpoint tensor '{}' does not match the network shape", name));
        const auto data = t.at("data").get<std::vector<double>>();
        if (static_cast<Index>(data.size()) != m.size()) throw Error(fmt::format("tensor '{}' has wrong size", name));
        m = Eigen::Map<const Matrix>(data.data(), m.rows(), m.cols());
    });
    return p;
}

std::vector<WindowSample> make_windows(const AlignedFrame& frame, std::string_view target, int w) {
    const Index days = frame.day_count();
    if (w < 1) throw Error("window must be at least 1");
    if (w >= days) throw Error(fmt::format("window {} needs more than {} days", w, days));
    const Index row = frame.require(target);
    std::vector<WindowSample> out;
    out.reserve(static_cast<std::size_t>(days - w));
    for (Index t = w - 1; t + 1 < days; ++t)
        out.push_back({frame.values.middleCols(t - w + 1, w), frame.values(row, t + 1), t});
    return out;
}

Sequence stack_inputs(std::span<const WindowSample> samples) {
    if (samples.empty()) return {};
    const Index rows = samples[0].input.rows();
    const Index w = samples[0].input.cols();
    const auto B = static_cast<Index>(samples.size());
    Sequence x(static_cast<std::size_t>(w), Matrix(rows, B));
    for (Index b = 0; b < B; ++b) {
        const auto& in = samples[static_cast<std::size_t>(b)].input;
        if (in.rows() != rows || in.cols() != w) throw Error("window samples differ in shape");
        for (Index t = 0; t < w; ++t) x[static_cast<std::size_t>(t)].col(b) = in.col(t);
    }
    return x;
}

namespace {

// h per time index for one direction.
std::vector<Matrix> run_direction(const LstmCell& cell, const std::vector<Matrix>& xs, bool reverse,
                                  DirectionCache* cache, std::string_view name) {
    const Index H = cell.U.cols();
    const auto w = xs.size();
    const Index B = xs.empty() ? 0 : xs[0].cols();
    Matrix h = Matrix::Zero(H, B), c = Matrix::Zero(H, B);
    std::vector<Matrix> out(w);
    for (std::size_t s = 0; s < w; ++s) {
        const std::size_t t = reverse ? w - 1 - s : s;
        Matrix z = cell.W * xs[t] + cell.U * h;
        z.colwise() += cell.b.col(0);
        if (!z.allFinite()) {
            static constexpr const char* gates[] = {"input", "forget", "cell", "output"};
            int gate = 0;
            for (; gate < 3; ++gate)
                if (!z.middleRows(gate * H, H).allFinite()) break;
            throw Error(fmt::format("non-finite activation in {} at step {} ({} gate)", name, t, gates[gate]));
        }
        Matrix i = sigmoid(z.topRows(H));
        Matrix f = sigmoid(z.middleRows(H, H));
        Matrix g = z.middleRows(2 * H, H).array().tanh().matrix();
        Matrix o = sigmoid(z.bottomRows(H));
        c = (f.array() * c.array() + i.array() * g.array()).matrix();
        h = (o.array() * c.array().tanh()).matrix();
        out[t] = h;
        if (cache) {
            cache->x.push_back(xs[t]);
            cache->i.push_back(std::move(i));
            cache->f.push_back(std::move(f));
            cache->g.push_back(std::move(g));
            cache->o.push_back(std::move(o));
            cache->c.push_back(c);
            cache->h.push_back(h);
        }
    }
    return out;
}

// dh_time: external gradient on h per time index (empty = zero). Returns dx per time index.
std::vector<Matrix> backprop_direction(const LstmCell& cell, LstmCell& grad, const DirectionCache& cache,
                                       const std::vector<Matrix>& dh_time, bool reverse) {
    const Index H = cell.U.cols();
    const auto w = cache.x.size();
    const Index B = cache.x.empty() ? 0 : cache.x[0].cols();
    std::vector<Matrix> dx(w);
    Matrix dh_next = Matrix::Zero(H, B), dc_next = Matrix::Zero(H, B);
    const Matrix zero = Matrix::Zero(H, B);
    Matrix dz(4 * H, B);
    for (std::size_t s = w; s-- > 0;) {
        const std::size_t t = reverse ? w - 1 - s : s;
        Matrix dh = dh_next;
        if (dh_time[t].size()) dh += dh_time[t];
        const Matrix& c_prev = s > 0 ? cache.c[s - 1] : zero;
        const Matrix& h_prev = s > 0 ? cache.h[s - 1] : zero;
        const auto& i = cache.i[s].array();
        const auto& f = cache.f[s].array();
        const auto& g = cache.g[s].array();
        const auto& o = cache.o[s].array();
        const Eigen::ArrayXXd tc = cache.c[s].array().tanh();
        const Eigen::ArrayXXd dc = dc_next.array() + dh.array() * o * (1.0 - tc.square());
        dz.topRows(H) = (dc * g * i * (1.0 - i)).matrix();
        dz.middleRows(H, H) = (dc * c_prev.array() * f * (1.0 - f)).matrix();
        dz.middleRows(2 * H, H) = (dc * i * (1.0 - g.square())).matrix();
        dz.bottomRows(H) = (dh.array() * tc * o * (1.0 - o)).matrix();
        grad.W.noalias() += dz * cache.x[s].transpose();
        grad.U.noalias() += dz * h_prev.transpose();
        grad.b += dz.rowwise().sum();
        dx[t].noalias() = cell.W.transpose() * dz;
        dh_next.noalias() = cell.U.transpose() * dz;
        dc_next = (dc * f).matrix();
    }
    return dx;
}

}  // namespace

Matrix dropout_mask(Index rows, Index cols, double rate, std::mt19937_64& rng) {
    std::bernoulli_distribution keep(1.0 - rate);
    const double scale = 1.0 / (1.0 - rate);
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = keep(rng) ? scale : 0.0;
    return m;
}

RowVector forward(const LstmParams& p, const Sequence& x, double dropout, std::mt19937_64* rng, ForwardCache* cache) {
    if (x.empty()) throw Error("forward needs a window of at least one step");
    for (const auto& step : x)
        if (step.rows() != p.input_dim)
            throw Error(fmt::format("input has {} features, network expects {}", step.rows(), p.input_dim));
    const Index H = p.hidden;
    const Index B = x[0].cols();
    const auto w = x.size();
    const bool drop = rng != nullptr && dropout > 0.0;

    if (cache) {
        *cache = ForwardCache{};
        cache->inputs = x;
    }
    const auto h1f = run_direction(p.l1_fwd, x, false, cache ? &cache->l1_fwd : nullptr, "layer 1 forward");
    const auto h1b = run_direction(p.l1_bwd, x, true, cache ? &cache->l1_bwd : nullptr, "layer 1 backward");
    std::vector<Matrix> x2(w);
    for (std::size_t t = 0; t < w; ++t) {
        x2[t].resize(2 * H, B);
        x2[t].topRows(H) = h1f[t];
        x2[t].bottomRows(H) = h1b[t];
        if (drop) {
            Matrix m = dropout_mask(2 * H, B, dropout, *rng);
            x2[t].array() *= m.array();
            if (cache) cache->mask1.push_back(std::move(m));
        }
    }
    const auto h2f = run_direction(p.l2_fwd, x2, false, cache ? &cache->l2_fwd : nullptr, "layer 2 forward");
    const auto h2b = run_direction(p.l2_bwd, x2, true, cache ? &cache->l2_bwd : nullptr, "layer 2 backward");
    Matrix h(2 * H, B);
    h.topRows(H) = h2f[w - 1];
    h.bottomRows(H) = h2b[0];
    if (drop) {
        Matrix m = dropout_mask(2 * H, B, dropout, *rng);
        h.array() *= m.array();
        if (cache) cache->mask2 = std::move(m);
    }
    Matrix a = p.fc_W * h;
    a.colwise() += p.fc_b.col(0);
    a = a.array().tanh().matrix();
    RowVector y = p.out_W * a;
    y.array() += p.out_b(0, 0);
    if (!y.allFinite()) throw Error("non-finite network output");
    if (cache) {
        cache->h = std::move(h);
        cache->hidden = std::move(a);
        cache->prediction = y;
        cache->valid = true;
    }
    return y;
}

double forward(const LstmParams& p, const WindowSample& sample) {
    return forward(p, stack_inputs(std::span<const WindowSample>(&sample, 1)))(0);
}

double mse_loss(const ForwardCache& cache, const RowVector& targets) {
    if (!cache.valid) throw Error("loss needs a cached forward pass");
    return (cache.prediction - targets).squaredNorm() / static_cast<double>(targets.size());
}

LstmParams backward(const LstmParams& p, const ForwardCache& cache, const RowVector& targets) {
    if (!cache.valid) throw Error("backward needs the cache of a training forward pass");
    if (targets.size() != cache.prediction.size()) throw Error("target count differs from the batch size");
    const Index H = p.hidden;
    const Index B = targets.size();
    const auto w = cache.inputs.size();
    LstmParams g = p.zeros_like();

    const RowVector dy = 2.0 * (cache.prediction - targets) / static_cast<double>(B);
    g.out_W = dy * cache.hidden.transpose();
    g.out_b(0, 0) = dy.sum();
    const Matrix dz_fc = ((p.out_W.transpose() * dy).array() * (1.0 - cache.hidden.array().square())).matrix();
    g.fc_W = dz_fc * cache.h.transpose();
    g.fc_b = dz_fc.rowwise().sum();
    Matrix dh = p.fc_W.transpose() * dz_fc;
    if (cache.mask2.size()) dh.array() *= cache.mask2.array();

    std::vector<Matrix> dh2f(w), dh2b(w);
    dh2f[w - 1] = dh.topRows(H);
    dh2b[0] = dh.bottomRows(H);
    const auto dx2f = backprop_direction(p.l2_fwd, g.l2_fwd, cache.l2_fwd, dh2f, false);
    const auto dx2b = backprop_direction(p.l2_bwd, g.l2_bwd, cache.l2_bwd, dh2b, true);

    std::vector<Matrix> dh1f(w), dh1b(w);
    for (std::size_t t = 0; t < w; ++t) {
        Matrix d = dx2f[t] + dx2b[t];
        if (!cache.mask1.empty()) d.array() *= cache.mask1[t].array();
        dh1f[t] = d.topRows(H);
        dh1b[t] = d.bottomRows(H);
    }
    backprop_direction(p.l1_fwd, g.l1_fwd, cache.l1_fwd, dh1f, false);
    backprop_direction(p.l1_bwd, g.l1_bwd, cache.l1_bwd, dh1b, true);
    return g;
}

void Adam::init(const LstmParams& like) {
    m = like.zeros_like();
    v = like.zeros_like();
    step = 0;
}

void Adam::update(LstmParams& p, const LstmParams& grad, double lr) {
    ++step;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    std::vector<Matrix*> ps, gs, ms, vs;
    p.for_each_tensor([&](const std::string&, Matrix& t) { ps.push_back(&t); });
    const_cast<LstmParams&>(grad).for_each_tensor([&](const std::string&, Matrix& t) { gs.push_back(&t); });
    m.for_each_tensor([&](const std::string&, Matrix& t) { ms.push_back(&t); });
    v.for_each_tensor([&](const std::string&, Matrix& t) { vs.push_back(&t); });
    for (std::size_t k = 0; k < ps.size(); ++k) {
        auto gk = gs[k]->array();
        ms[k]->array() = beta1 * ms[k]->array() + (1.0 - beta1) * gk;
        vs[k]->array() = beta2 * vs[k]->array() + (1.0 - beta2) * gk.square();
        ps[k]->array() -= lr * (ms[k]->array() / c1) / ((vs[k]->array() / c2).sqrt() + eps);
    }
}

double evaluate_mse(const LstmParams& p, std::span<const WindowSample> samples) {
    if (samples.empty()) throw Error("no samples to evaluate");
    double sse = 0.0;
    constexpr std::size_t chunk = 256;
    for (std::size_t s = 0; s < samples.size(); s += chunk) {
        const auto part = samples.subspan(s, std::min(chunk, samples.size() - s));
        const RowVector y = forward(p, stack_inputs(part));
        for (std::size_t b = 0; b < part.size(); ++b) {
            const double e = y(static_cast<Index>(b)) - part[b].target;
            sse += e * e;
        }
    }
    return sse / static_cast<double>(samples.size());
}

TrainResult train(std::span<const WindowSample> train_set, const ModelConfig& config,
                  std::span<const WindowSample> validation_set, const EpochCallback& on_epoch) {
    config.validate();
    if (train_set.empty()) throw Error("training set is empty");
    if (static_cast<std::size_t>(config.batch) > train_set.size())
        throw Error(fmt::format("batch size {} exceeds the {} training samples", config.batch, train_set.size()));

    LstmParams params = init_params(static_cast<int>(train_set[0].input.rows()), config.hidden, config.fc, config.seed);
    auto rng = seeded(config.seed, 2);
    Adam adam;
    adam.init(params);

    TrainResult r;
    r.params = params;
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<WindowSample> batch;
    RowVector targets;
    ForwardCache cache;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch)) {
            const auto end = std::min(order.size(), start + static_cast<std::size_t>(config.batch));
            batch.clear();
            targets.resize(static_cast<Index>(end - start));
            for (std::size_t k = start; k < end; ++k) {
                batch.push_back(train_set[order[k]]);
                targets(static_cast<Index>(k - start)) = train_set[order[k]].target;
            }
            forward(params, stack_inputs(batch), config.dropout, &rng, &cache);
            const auto grad = backward(params, cache, targets);
            adam.update(params, grad, config.learning_rate);
        }
        const double train_loss = evaluate_mse(params, train_set);
        r.train_loss.push_back(train_loss);
        double monitored = train_loss;
        if (!validation_set.empty()) {
            monitored = evaluate_mse(params, validation_set);
            r.validation_loss.push_back(monitored);
        }
        if (!std::isfinite(monitored)) throw Error(fmt::format("training diverged at epoch {}", epoch));
        if (monitored < best) {
            best = monitored;
            r.params = params;
            r.best_epoch = epoch;
        } else if (config.patience > 0 && epoch - r.best_epoch >= config.patience) {
            r.stopped_early = true;
            break;
        }
        if (on_epoch && !on_epoch(epoch, monitored)) {
            r.stopped_early = true;
            break;
        }
    }
    return r;
}

std::vector<double> predict_normalized(const LstmParams& p, std::span<const WindowSample> samples) {
    std::vector<double> out;
    out.reserve(samples.size());
    constexpr std::size_t chunk = 256;
    for (std::size_t s = 0; s < samples.size(); s += chunk) {
        const auto part = samples.subspan(s, std::min(chunk, samples.size() - s));
        const RowVector y = forward(p, stack_inputs(part));
        out.insert(out.end(), y.data(), y.data() + y.size());
    }
    return out;
}

std::vector<double> predict_series(const LstmParams& p, std::span<const WindowSample> samples,
                                   const MinMaxScaling& scaling, std::string_view target) {
    if (scaling.features.empty()) throw Error("prediction needs normalization metadata");
    auto y = predict_normalized(p, samples);
    for (double& v : y) v = scaling.denormalize(target, v);
    return y;
}

std::string loss_history_csv(const TrainResult& r) {
    std::string out = "epoch,train_loss,validation_loss\n";
    for (std::size_t e = 0; e < r.train_loss.size(); ++e)
        out += fmt::format("{},{},{}\n", e + 1, format_real(r.train_loss[e]),
                           e < r.validation_loss.size() ? format_real(r.validation_loss[e]) : std::string{});
    return out;
}

}  // namespace ius
