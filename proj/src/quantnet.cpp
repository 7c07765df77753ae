#include "capguard/quantnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "json.hpp"

#include "capguard/stats.hpp"

namespace capguard::quantnet {

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr double kBnMomentum = 0.1;
constexpr double kStdFloor = 1e-9;  // below this a feature counts as constant

double pinball(double tau, double u) { return u >= 0.0 ? tau * u : (tau - 1.0) * u; }

// d pinball / d y_hat with the u >= 0 branch owning the kink.
double pinball_slope(double tau, double u) { return u >= 0.0 ? -tau : 1.0 - tau; }

void check_taus(double tau_lo, double tau_hi) {
    if (!(tau_lo > 0.0 && tau_lo < tau_hi && tau_hi < 1.0))
        throw std::invalid_argument("quantnet: need 0 < tau_lo < tau_hi < 1");
}

}  // namespace

double pinball_loss(double tau, double y, double y_hat) {
    if (!(tau > 0.0 && tau < 1.0))
        throw std::invalid_argument("pinball_loss: tau must be in (0, 1)");
    return pinball(tau, y - y_hat);
}

Mlp Mlp::make(int in_dim, const std::vector<int>& hidden, double tau_lo,
              double tau_hi, rng::Stream& stream) {
    if (in_dim < 1) throw std::invalid_argument("Mlp::make: in_dim must be >= 1");
    for (int w : hidden)
        if (w < 1) throw std::invalid_argument("Mlp::make: hidden widths must be >= 1");
    check_taus(tau_lo, tau_hi);

    Mlp net;
    net.tau_lo = tau_lo;
    net.tau_hi = tau_hi;
    int fan_in = in_dim;
    std::vector<int> widths = hidden;
    widths.push_back(2);
    for (std::size_t l = 0; l < widths.size(); ++l) {
        Layer layer;
        const int out = widths[l];
        layer.W.resize(out, fan_in);
        const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (Eigen::Index i = 0; i < layer.W.size(); ++i)
            layer.W.data()[i] = scale * stream.normal();
        layer.b = Eigen::VectorXd::Zero(out);
        layer.bn = l + 1 < widths.size();
        if (layer.bn) {
            layer.gamma = Eigen::VectorXd::Ones(out);
            layer.beta = Eigen::VectorXd::Zero(out);
            layer.run_mean = Eigen::VectorXd::Zero(out);
            layer.run_var = Eigen::VectorXd::Ones(out);
        }
        net.layers.push_back(std::move(layer));
        fan_in = out;
    }
    return net;
}

int Mlp::in_dim() const {
    if (layers.empty()) throw std::logic_error("Mlp: no layers");
    return static_cast<int>(layers.front().W.cols());
}

double Mlp::loss_and_grad(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          Mlp& grad, BatchStats* stats) const {
    const Eigen::Index B = X.cols();
    const Eigen::Index L = static_cast<Eigen::Index>(layers.size());
    if (L == 0) throw std::logic_error("Mlp: no layers");
    if (X.rows() != layers.front().W.cols())
        throw std::invalid_argument("Mlp: input width mismatch");
    if (y.size() != B) throw std::invalid_argument("Mlp: label count mismatch");
    if (B < 1) throw std::invalid_argument("Mlp: empty batch");

    if (stats) {
        stats->mean.clear();
        stats->var.clear();
    }

    // Forward, keeping what the backward pass needs.
    std::vector<Eigen::MatrixXd> inputs(L);   // activation entering each layer
    std::vector<Eigen::MatrixXd> outputs(L);  // post-ReLU output of each layer
    std::vector<Eigen::MatrixXd> xhat(L);     // normalized pre-activation (bn)
    std::vector<Eigen::VectorXd> inv_sigma(L);
    Eigen::MatrixXd h = X;
    for (Eigen::Index l = 0; l < L; ++l) {
        const Layer& lay = layers[l];
        inputs[l] = h;
        Eigen::MatrixXd z = (lay.W * h).colwise() + lay.b;
        Eigen::MatrixXd a;
        if (lay.bn) {
            const Eigen::VectorXd mu = z.rowwise().mean();
            const Eigen::MatrixXd centered = z.colwise() - mu;
            const Eigen::VectorXd var =
                centered.array().square().rowwise().sum().matrix() /
                static_cast<double>(B);
            inv_sigma[l] = (var.array() + kBnEps).sqrt().inverse().matrix();
            xhat[l] = (centered.array().colwise() * inv_sigma[l].array()).matrix();
            a = ((xhat[l].array().colwise() * lay.gamma.array()).colwise() +
                 lay.beta.array())
                    .matrix();
            if (stats) {
                stats->mean.push_back(mu);
                // Unbiased variance for the running estimate; normalization
                // itself stays on the batch-averaged one above.
                if (B > 1)
                    stats->var.push_back(var * (static_cast<double>(B) /
                                                static_cast<double>(B - 1)));
                else
                    stats->var.push_back(var);
            }
        } else {
            a = z;
        }
        outputs[l] = a.cwiseMax(0.0);
        h = outputs[l];
    }

    // Loss and its gradient at the two heads.
    const Eigen::MatrixXd& out = outputs[L - 1];
    if (out.rows() != 2) throw std::logic_error("Mlp: output width must be 2");
    double loss = 0.0;
    Eigen::MatrixXd dh(2, B);
    for (Eigen::Index i = 0; i < B; ++i) {
        const double u_lo = y[i] - out(0, i);
        const double u_hi = y[i] - out(1, i);
        loss += pinball(tau_lo, u_lo) + pinball(tau_hi, u_hi);
        dh(0, i) = pinball_slope(tau_lo, u_lo) / static_cast<double>(B);
        dh(1, i) = pinball_slope(tau_hi, u_hi) / static_cast<double>(B);
    }
    loss /= static_cast<double>(B);

    // Backward. The assignments below overwrite every parameter gradient and
    // reuse the caller's storage when shapes already match, keeping pointers
    // from param_blocks() stable across calls.
    if (grad.layers.size() != layers.size()) grad = zeros_like();
    for (Eigen::Index l = L - 1; l >= 0; --l) {
        const Layer& lay = layers[l];
        Layer& g = grad.layers[l];
        Eigen::MatrixXd da =
            dh.cwiseProduct((outputs[l].array() > 0.0).cast<double>().matrix());
        Eigen::MatrixXd dz;
        if (lay.bn) {
            g.gamma = da.cwiseProduct(xhat[l]).rowwise().sum();
            g.beta = da.rowwise().sum();
            const Eigen::MatrixXd dxhat =
                (da.array().colwise() * lay.gamma.array()).matrix();
            const Eigen::VectorXd sum_dxhat = dxhat.rowwise().sum();
            const Eigen::VectorXd sum_dxhat_xhat =
                dxhat.cwiseProduct(xhat[l]).rowwise().sum();
            Eigen::MatrixXd inner = static_cast<double>(B) * dxhat;
            inner.colwise() -= sum_dxhat;
            inner -= (xhat[l].array().colwise() * sum_dxhat_xhat.array()).matrix();
            dz = (inner.array().colwise() *
                  (inv_sigma[l].array() / static_cast<double>(B)))
                     .matrix();
        } else {
            dz = da;
        }
        g.W = dz * inputs[l].transpose();
        // Under batch normalization the bias cancels against the batch mean,
        // so only unnormalized layers carry a bias gradient (beta is the
        // shift parameter on the others).
        if (!lay.bn) g.b = dz.rowwise().sum();
        if (l > 0) dh = lay.W.transpose() * dz;
    }
    return loss;
}

void Mlp::update_running(const BatchStats& stats, double momentum) {
    std::size_t idx = 0;
    for (Layer& lay : layers) {
        if (!lay.bn) continue;
        if (idx >= stats.mean.size())
            throw std::invalid_argument("Mlp: batch stats do not match layers");
        lay.run_mean = (1.0 - momentum) * lay.run_mean + momentum * stats.mean[idx];
        lay.run_var = (1.0 - momentum) * lay.run_var + momentum * stats.var[idx];
        ++idx;
    }
}

Eigen::MatrixXd Mlp::infer(const Eigen::MatrixXd& X) const {
    if (layers.empty()) throw std::logic_error("Mlp: no layers");
    if (X.rows() != layers.front().W.cols())
        throw std::invalid_argument("Mlp: input width mismatch");
    Eigen::MatrixXd h = X;
    for (const Layer& lay : layers) {
        Eigen::MatrixXd z = (lay.W * h).colwise() + lay.b;
        if (lay.bn) {
            const Eigen::VectorXd inv_sigma =
                (lay.run_var.array() + kBnEps).sqrt().inverse().matrix();
            z = (((z.colwise() - lay.run_mean).array().colwise() *
                  (inv_sigma.array() * lay.gamma.array()))
                     .colwise() +
                 lay.beta.array())
                    .matrix();
        }
        h = z.cwiseMax(0.0);
    }
    return h;
}

std::vector<std::pair<double*, std::size_t>> Mlp::param_blocks() {
    std::vector<std::pair<double*, std::size_t>> blocks;
    for (Layer& lay : layers) {
        blocks.emplace_back(lay.W.data(), static_cast<std::size_t>(lay.W.size()));
        if (lay.bn) {
            // The bias is redundant under normalization (beta shifts instead)
            // and its gradient is identically zero, so it is not a parameter.
            blocks.emplace_back(lay.gamma.data(),
                                static_cast<std::size_t>(lay.gamma.size()));
            blocks.emplace_back(lay.beta.data(),
                                static_cast<std::size_t>(lay.beta.size()));
        } else {
            blocks.emplace_back(lay.b.data(),
                                static_cast<std::size_t>(lay.b.size()));
        }
    }
    return blocks;
}

Mlp Mlp::zeros_like() const {
    Mlp z;
    z.tau_lo = tau_lo;
    z.tau_hi = tau_hi;
    z.layers.reserve(layers.size());
    for (const Layer& lay : layers) {
        Layer zl;
        zl.W = Eigen::MatrixXd::Zero(lay.W.rows(), lay.W.cols());
        zl.b = Eigen::VectorXd::Zero(lay.b.size());
        zl.bn = lay.bn;
        if (lay.bn) {
            zl.gamma = Eigen::VectorXd::Zero(lay.gamma.size());
            zl.beta = Eigen::VectorXd::Zero(lay.beta.size());
            zl.run_mean = Eigen::VectorXd::Zero(lay.run_mean.size());
            zl.run_var = Eigen::VectorXd::Zero(lay.run_var.size());
        }
        z.layers.push_back(std::move(zl));
    }
    return z;
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (!(learning_rate > 0.0))
        throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    if (max_epochs < 1) throw std::invalid_argument("TrainConfig: max_epochs must be >= 1");
    if (patience < 1) throw std::invalid_argument("TrainConfig: patience must be >= 1");
    if (!(val_fraction > 0.0 && val_fraction <= 0.5))
        throw std::invalid_argument("TrainConfig: val_fraction must be in (0, 0.5]");
    check_taus(tau_lo, tau_hi);
    for (int w : hidden)
        if (w < 1) throw std::invalid_argument("TrainConfig: hidden widths must be >= 1");
}

TrainingDiverged::TrainingDiverged(int epoch)
    : std::runtime_error("train: loss became non-finite at epoch " +
                         std::to_string(epoch)),
      epoch_(epoch) {}

QuantileModel train(const std::vector<std::vector<double>>& X,
                    const std::vector<double>& y, const TrainConfig& cfg,
                    std::vector<EpochLog>* log) {
    cfg.validate();
    const std::size_t n = X.size();
    if (n != y.size()) throw std::invalid_argument("train: feature/label count mismatch");
    if (n < 2 * static_cast<std::size_t>(cfg.batch_size))
        throw std::invalid_argument("train: need at least 2*batch_size samples");
    const std::size_t in_dim = X.front().size();
    if (in_dim == 0) throw std::invalid_argument("train: empty feature vectors");
    for (const auto& row : X) {
        if (row.size() != in_dim)
            throw std::invalid_argument("train: ragged feature matrix");
        for (double v : row)
            if (!std::isfinite(v))
                throw std::invalid_argument("train: non-finite feature value");
    }
    for (double v : y)
        if (!std::isfinite(v)) throw std::invalid_argument("train: non-finite label");

    // Input standardization from the full training argument; near-constant
    // features pass through unscaled.
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(in_dim);
    Eigen::VectorXd sd = Eigen::VectorXd::Zero(in_dim);
    for (const auto& row : X)
        for (std::size_t j = 0; j < in_dim; ++j) mean[j] += row[j];
    mean /= static_cast<double>(n);
    for (const auto& row : X)
        for (std::size_t j = 0; j < in_dim; ++j) {
            const double d = row[j] - mean[j];
            sd[j] += d * d;
        }
    sd = (sd / static_cast<double>(n)).array().sqrt().matrix();
    for (std::size_t j = 0; j < in_dim; ++j)
        if (sd[j] < kStdFloor) sd[j] = 1.0;

    Eigen::MatrixXd Xs(in_dim, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < in_dim; ++j)
            Xs(j, i) = (X[i][j] - mean[j]) / sd[j];
    Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), n);

    // One seeded stream drives everything in a fixed order: validation
    // split, weight initialization, then the per-epoch batch shuffles.
    rng::Stream stream(cfg.seed);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[stream.below(i)]);
    const std::size_t n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(cfg.val_fraction * static_cast<double>(n))));
    std::vector<std::size_t> train_idx(idx.begin(), idx.end() - n_val);
    std::vector<std::size_t> val_idx(idx.end() - n_val, idx.end());

    Mlp net = Mlp::make(static_cast<int>(in_dim), cfg.hidden, cfg.tau_lo,
                        cfg.tau_hi, stream);

    Eigen::MatrixXd Xv(in_dim, n_val);
    Eigen::VectorXd yval(n_val);
    for (std::size_t i = 0; i < n_val; ++i) {
        Xv.col(i) = Xs.col(val_idx[i]);
        yval[i] = yv[val_idx[i]];
    }
    auto val_loss_of = [&](const Mlp& m) {
        const Eigen::MatrixXd out = m.infer(Xv);
        double loss = 0.0;
        for (std::size_t i = 0; i < n_val; ++i)
            loss += pinball(cfg.tau_lo, yval[i] - out(0, i)) +
                    pinball(cfg.tau_hi, yval[i] - out(1, i));
        return loss / static_cast<double>(n_val);
    };

    Mlp grad = net.zeros_like();
    Mlp m_state = net.zeros_like();
    Mlp v_state = net.zeros_like();
    auto theta_blocks = net.param_blocks();
    auto grad_blocks = grad.param_blocks();
    auto m_blocks = m_state.param_blocks();
    auto v_blocks = v_state.param_blocks();

    const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
    const std::size_t n_batches = train_idx.size() / batch;  // drop the tail
    Eigen::MatrixXd Xb(in_dim, batch);
    Eigen::VectorXd yb(batch);
    Mlp::BatchStats stats;

    Mlp best = net;
    double best_val = std::numeric_limits<double>::infinity();
    int wait = 0;
    int epochs_run = 0;
    long long step = 0;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        for (std::size_t i = train_idx.size(); i > 1; --i)
            std::swap(train_idx[i - 1], train_idx[stream.below(i)]);

        double epoch_loss = 0.0;
        for (std::size_t bi = 0; bi < n_batches; ++bi) {
            for (std::size_t c = 0; c < batch; ++c) {
                const std::size_t row = train_idx[bi * batch + c];
                Xb.col(c) = Xs.col(row);
                yb[c] = yv[row];
            }
            const double loss = net.loss_and_grad(Xb, yb, grad, &stats);
            if (!std::isfinite(loss)) throw TrainingDiverged(epoch);
            net.update_running(stats, kBnMomentum);

            ++step;
            const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step));
            for (std::size_t blk = 0; blk < theta_blocks.size(); ++blk) {
                double* t = theta_blocks[blk].first;
                const double* g = grad_blocks[blk].first;
                double* ms = m_blocks[blk].first;
                double* vs = v_blocks[blk].first;
                const std::size_t len = theta_blocks[blk].second;
                for (std::size_t p = 0; p < len; ++p) {
                    ms[p] = kAdamBeta1 * ms[p] + (1.0 - kAdamBeta1) * g[p];
                    vs[p] = kAdamBeta2 * vs[p] + (1.0 - kAdamBeta2) * g[p] * g[p];
                    t[p] -= cfg.learning_rate * (ms[p] / bc1) /
                            (std::sqrt(vs[p] / bc2) + kAdamEps);
                }
            }
            epoch_loss += loss;
        }
        epoch_loss /= static_cast<double>(n_batches);

        const double val_loss = val_loss_of(net);
        if (log) log->push_back({epoch, epoch_loss, val_loss});
        epochs_run = epoch;

        if (val_loss < best_val) {
            best_val = val_loss;
            best = net;
            wait = 0;
        } else if (++wait >= cfg.patience) {
            break;
        }
    }

    QuantileModel model;
    model.net = std::move(best);
    model.x_mean = std::move(mean);
    model.x_std = std::move(sd);
    model.seed = cfg.seed;
    model.epochs_run = epochs_run;
    model.final_val_loss = best_val;
    return model;
}

QuantileModel train(const dataset::Dataset& ds, const TrainConfig& cfg,
                    std::vector<EpochLog>* log) {
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    X.reserve(ds.samples.size());
    y.reserve(ds.samples.size());
    for (const auto& s : ds.samples) {
        X.emplace_back(s.x.begin(), s.x.end());
        y.push_back(s.y);
    }
    return train(X, y, cfg, log);
}

std::pair<double, double> QuantileModel::predict(const std::vector<double>& x) const {
    if (net.layers.empty()) throw std::logic_error("predict: model has no layers");
    const Eigen::Index in_dim = net.layers.front().W.cols();
    if (static_cast<Eigen::Index>(x.size()) != in_dim)
        throw std::invalid_argument("predict: expected " + std::to_string(in_dim) +
                                    " features, got " + std::to_string(x.size()));
    Eigen::MatrixXd col(in_dim, 1);
    for (Eigen::Index j = 0; j < in_dim; ++j) {
        if (!std::isfinite(x[j]))
            throw std::domain_error("predict: non-finite input feature");
        col(j, 0) = (x[j] - x_mean[j]) / x_std[j];
    }
    const Eigen::MatrixXd out = net.infer(col);
    const double a = out(0, 0), b = out(1, 0);
    return {std::min(a, b), std::max(a, b)};
}

std::vector<std::pair<double, double>> QuantileModel::predict(
    const std::vector<std::vector<double>>& xs) const {
    std::vector<std::pair<double, double>> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(predict(x));
    return out;
}

namespace {

nlohmann::json vec_json(const Eigen::VectorXd& v) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Eigen::VectorXd json_vec(const nlohmann::json& a, std::size_t expect,
                         const char* what) {
    if (!a.is_array() || a.size() != expect)
        throw std::runtime_error(std::string("load: bad length for ") + what);
    Eigen::VectorXd v(expect);
    for (std::size_t i = 0; i < expect; ++i) v[i] = a.at(i).get<double>();
    return v;
}

}  // namespace

void save(const QuantileModel& m, const std::string& path) {
    if (m.net.layers.empty()) throw std::logic_error("save: model has no layers");
    nlohmann::json j;
    j["schema"] = kModelSchema;
    j["tau_lo"] = m.net.tau_lo;
    j["tau_hi"] = m.net.tau_hi;
    j["in_dim"] = m.net.layers.front().W.cols();
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& lay : m.net.layers) {
        nlohmann::json lj;
        lj["out"] = lay.W.rows();
        lj["in"] = lay.W.cols();
        nlohmann::json w = nlohmann::json::array();  // row-major
        for (Eigen::Index r = 0; r < lay.W.rows(); ++r)
            for (Eigen::Index c = 0; c < lay.W.cols(); ++c) w.push_back(lay.W(r, c));
        lj["w"] = std::move(w);
        lj["b"] = vec_json(lay.b);
        lj["bn"] = lay.bn;
        if (lay.bn) {
            lj["gamma"] = vec_json(lay.gamma);
            lj["beta"] = vec_json(lay.beta);
            lj["run_mean"] = vec_json(lay.run_mean);
            lj["run_var"] = vec_json(lay.run_var);
        }
        layers.push_back(std::move(lj));
    }
    j["layers"] = std::move(layers);
    j["x_mean"] = vec_json(m.x_mean);
    j["x_std"] = vec_json(m.x_std);
    j["metadata"] = {{"seed", m.seed},
                     {"epochs_run", m.epochs_run},
                     {"final_val_loss", m.final_val_loss}};

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save: cannot open " + path);
    out << j.dump();
    out << '\n';
    if (!out) throw std::runtime_error("save: write failed for " + path);
}

QuantileModel load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("load: cannot parse " + path + ": " + e.what());
    }
    const std::string schema = j.value("schema", "(missing)");
    if (schema != kModelSchema)
        throw std::runtime_error("load: model schema '" + schema + "', expected '" +
                                 kModelSchema + "'");
    try {
        QuantileModel m;
        m.net.tau_lo = j.at("tau_lo").get<double>();
        m.net.tau_hi = j.at("tau_hi").get<double>();
        check_taus(m.net.tau_lo, m.net.tau_hi);
        std::size_t fan_in = j.at("in_dim").get<std::size_t>();
        if (fan_in == 0) throw std::runtime_error("load: in_dim must be >= 1");
        const std::size_t model_in = fan_in;
        for (const auto& lj : j.at("layers")) {
            Mlp::Layer lay;
            const std::size_t out = lj.at("out").get<std::size_t>();
            const std::size_t in_w = lj.at("in").get<std::size_t>();
            if (out == 0 || in_w != fan_in)
                throw std::runtime_error("load: inconsistent layer dimensions");
            const auto& w = lj.at("w");
            if (!w.is_array() || w.size() != out * in_w)
                throw std::runtime_error("load: bad length for w");
            lay.W.resize(out, in_w);
            std::size_t k = 0;
            for (std::size_t r = 0; r < out; ++r)
                for (std::size_t c = 0; c < in_w; ++c)
                    lay.W(r, c) = w.at(k++).get<double>();
            lay.b = json_vec(lj.at("b"), out, "b");
            lay.bn = lj.at("bn").get<bool>();
            if (lay.bn) {
                lay.gamma = json_vec(lj.at("gamma"), out, "gamma");
                lay.beta = json_vec(lj.at("beta"), out, "beta");
                lay.run_mean = json_vec(lj.at("run_mean"), out, "run_mean");
                lay.run_var = json_vec(lj.at("run_var"), out, "run_var");
            }
            m.net.layers.push_back(std::move(lay));
            fan_in = out;
        }
        if (m.net.layers.empty() || fan_in != 2)
            throw std::runtime_error("load: network must end in a 2-unit output");
        if (m.net.layers.back().bn)
            throw std::runtime_error("load: output layer must not normalize");
        m.x_mean = json_vec(j.at("x_mean"), model_in, "x_mean");
        m.x_std = json_vec(j.at("x_std"), model_in, "x_std");
        for (Eigen::Index i = 0; i < m.x_std.size(); ++i)
            if (!(m.x_std[i] > 0.0))
                throw std::runtime_error("load: x_std entries must be > 0");
        const auto& meta = j.at("metadata");
        m.seed = meta.at("seed").get<std::uint64_t>();
        m.epochs_run = meta.at("epochs_run").get<int>();
        m.final_val_loss = meta.at("final_val_loss").get<double>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("load: malformed model file " + path + ": " +
                                 e.what());
    }
}

std::string training_log_csv(const std::vector<EpochLog>& log) {
    std::ostringstream os;
    os << "epoch, train_loss, val_loss\n";
    for (const auto& e : log)
        os << e.epoch << ',' << stats::fmt_g9(e.train_loss) << ','
           << stats::fmt_g9(e.val_loss) << '\n';
    return os.str();
}

}  // namespace capguard::quantnet
