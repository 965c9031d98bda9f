#include <algorithm>
#include <cmath>
#include <limits>

#include "landkit/errors.hpp"
#include "landkit/models.hpp"
#include "landkit/rng.hpp"

namespace landkit {

namespace {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;

// ---------------------------------------------------------------------------
// shared pieces
// ---------------------------------------------------------------------------

void glorot_fill(double* data, size_t count, int fan_in, int fan_out,
                 Rng& rng) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (size_t i = 0; i < count; ++i)
        data[i] = rng.next_uniform(-limit, limit);
}

MatrixXd softmax_rows(const MatrixXd& logits) {
    MatrixXd p = logits;
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        const double m = p.row(r).maxCoeff();
        p.row(r) = (p.row(r).array() - m).exp();
        p.row(r) /= p.row(r).sum();
    }
    return p;
}

double cross_entropy(const MatrixXd& probs, const std::vector<int>& labels) {
    double loss = 0.0;
    for (Eigen::Index r = 0; r < probs.rows(); ++r)
        loss -= std::log(probs(r, labels[static_cast<size_t>(r)]));
    return loss / static_cast<double>(probs.rows());
}

int argmax_row(const MatrixXd& m, Eigen::Index r) {
    int best = 0;
    for (Eigen::Index c = 1; c < m.cols(); ++c)
        if (m(r, c) > m(r, best)) best = static_cast<int>(c);
    return best;
}

size_t count_hits(const MatrixXd& probs, const std::vector<int>& labels) {
    size_t hits = 0;
    for (Eigen::Index r = 0; r < probs.rows(); ++r)
        hits += argmax_row(probs, r) == labels[static_cast<size_t>(r)];
    return hits;
}

// dL/dlogits for mean cross-entropy: (softmax - onehot) / n.
MatrixXd ce_logit_grad(const MatrixXd& probs, const std::vector<int>& labels) {
    MatrixXd g = probs;
    const double inv_n = 1.0 / static_cast<double>(probs.rows());
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
        g(r, labels[static_cast<size_t>(r)]) -= 1.0;
        g.row(r) *= inv_n;
    }
    return g;
}

// Flat (parameter, gradient) views Adam and the checker can walk.
struct ParamView {
    double* value;
    double* grad;
    size_t count;
};

// The two architectures behind one training loop.
class Net {
public:
    virtual ~Net() = default;
    virtual int n_classes() const = 0;
    // Chips as the net's input matrix (flat rows or pixel-block rows).
    virtual MatrixXd prepare(const ChipDataset& chips) const = 0;
    virtual MatrixXd gather(const MatrixXd& all,
                            const std::vector<size_t>& rows) const = 0;
    virtual MatrixXd forward(const MatrixXd& x, bool training, Rng* rng) = 0;
    virtual void backward(const MatrixXd& logit_grad) = 0;
    virtual std::vector<ParamView> params() = 0;
};

void check_chip_shape(const ChipDataset& chips, int chip_size, int channels) {
    if (chips.chips.empty()) throw EmptyInputError("no chips");
    for (const auto& c : chips.chips)
        if (c.chip_size != chip_size || c.channels != channels)
            throw ShapeError("chip shape does not match the model input");
}

class MlpNet : public Net {
public:
    explicit MlpNet(MlpModel model) : m_(std::move(model)) {
        gw1_.setZero(m_.w1.rows(), m_.w1.cols());
        gb1_.setZero(m_.b1.size());
        gw2_.setZero(m_.w2.rows(), m_.w2.cols());
        gb2_.setZero(m_.b2.size());
    }

    const MlpModel& model() const { return m_; }
    int n_classes() const override { return m_.n_classes; }

    MatrixXd prepare(const ChipDataset& chips) const override {
        if (chips.chips.empty()) throw EmptyInputError("no chips");
        const auto& first = chips.chips.front();
        if (first.chip_size * first.chip_size * first.channels != m_.input_dim)
            throw ShapeError("chip window size does not match MLP input");
        MatrixXd x(static_cast<Eigen::Index>(chips.size()), m_.input_dim);
        for (size_t i = 0; i < chips.size(); ++i) {
            const auto& w = chips.chips[i].window;
            if (static_cast<int>(w.size()) != m_.input_dim)
                throw ShapeError("chip window size does not match MLP input");
            for (int j = 0; j < m_.input_dim; ++j)
                x(static_cast<Eigen::Index>(i), j) = w[static_cast<size_t>(j)];
        }
        return x;
    }

    MatrixXd gather(const MatrixXd& all,
                    const std::vector<size_t>& rows) const override {
        MatrixXd out(static_cast<Eigen::Index>(rows.size()), all.cols());
        for (size_t i = 0; i < rows.size(); ++i)
            out.row(static_cast<Eigen::Index>(i)) =
                all.row(static_cast<Eigen::Index>(rows[i]));
        return out;
    }

    MatrixXd forward(const MatrixXd& x, bool, Rng*) override {
        x_ = x;
        h_pre_ = (x * m_.w1).rowwise() + m_.b1;
        h_ = h_pre_.cwiseMax(0.0);
        return (h_ * m_.w2).rowwise() + m_.b2;
    }

    void backward(const MatrixXd& g_logits) override {
        gw2_ = h_.transpose() * g_logits;
        gb2_ = g_logits.colwise().sum();
        MatrixXd gh = g_logits * m_.w2.transpose();
        gh = gh.cwiseProduct(
            (h_pre_.array() > 0.0).cast<double>().matrix());
        gw1_ = x_.transpose() * gh;
        gb1_ = gh.colwise().sum();
    }

    std::vector<ParamView> params() override {
        return {
            {m_.w1.data(), gw1_.data(), static_cast<size_t>(m_.w1.size())},
            {m_.b1.data(), gb1_.data(), static_cast<size_t>(m_.b1.size())},
            {m_.w2.data(), gw2_.data(), static_cast<size_t>(m_.w2.size())},
            {m_.b2.data(), gb2_.data(), static_cast<size_t>(m_.b2.size())},
        };
    }

private:
    MlpModel m_;
    MatrixXd x_, h_pre_, h_;
    MatrixXd gw1_, gw2_;
    RowVectorXd gb1_, gb2_;
};

class CnnNet : public Net {
public:
    explicit CnnNet(CnnModel model)
        : m_(std::move(model)),
          positions_(m_.chip_size * m_.chip_size) {
        const size_t layers = m_.conv_w.size();
        gconv_w_.resize(layers);
        gconv_b_.resize(layers);
        for (size_t l = 0; l < layers; ++l) {
            gconv_w_[l].setZero(m_.conv_w[l].rows(), m_.conv_w[l].cols());
            gconv_b_[l].setZero(m_.conv_b[l].size());
        }
        gdense_w_.setZero(m_.dense_w.rows(), m_.dense_w.cols());
        gdense_b_.setZero(m_.dense_b.size());
    }

    const CnnModel& model() const { return m_; }
    int n_classes() const override { return m_.n_classes; }

    // Pixel-block layout: sample i occupies rows [i*P, (i+1)*P), one row per
    // chip pixel, channels across columns — a 1x1 convolution is then a plain
    // matrix product.
    MatrixXd prepare(const ChipDataset& chips) const override {
        check_chip_shape(chips, m_.chip_size, m_.channels);
        MatrixXd x(static_cast<Eigen::Index>(chips.size() *
                                             static_cast<size_t>(positions_)),
                   m_.channels);
        for (size_t i = 0; i < chips.size(); ++i) {
            const auto& w = chips.chips[i].window;
            for (int p = 0; p < positions_; ++p)
                for (int c = 0; c < m_.channels; ++c)
                    x(static_cast<Eigen::Index>(i * positions_ + p), c) =
                        w[static_cast<size_t>(p) * m_.channels + c];
        }
        return x;
    }

    MatrixXd gather(const MatrixXd& all,
                    const std::vector<size_t>& rows) const override {
        MatrixXd out(static_cast<Eigen::Index>(rows.size()) * positions_,
                     all.cols());
        for (size_t i = 0; i < rows.size(); ++i)
            out.middleRows(static_cast<Eigen::Index>(i) * positions_,
                           positions_) =
                all.middleRows(static_cast<Eigen::Index>(rows[i]) * positions_,
                               positions_);
        return out;
    }

    MatrixXd forward(const MatrixXd& x, bool training, Rng* rng) override {
        x_ = x;
        const auto n = static_cast<Eigen::Index>(x.rows() / positions_);

        pre_.resize(m_.conv_w.size());
        act_.resize(m_.conv_w.size());
        drop_.assign(m_.conv_w.size(), MatrixXd());
        const MatrixXd* in = &x_;
        for (size_t l = 0; l < m_.conv_w.size(); ++l) {
            pre_[l] = (*in * m_.conv_w[l]).rowwise() + m_.conv_b[l];
            act_[l] = pre_[l].cwiseMax(0.0);
            const double rate = dropout_rate(l);
            if (training && rate > 0.0) {
                drop_[l] = MatrixXd::Zero(act_[l].rows(), act_[l].cols());
                const double scale = 1.0 / (1.0 - rate);
                for (Eigen::Index i = 0; i < drop_[l].size(); ++i)
                    drop_[l].data()[i] =
                        rng->next_double() >= rate ? scale : 0.0;
                act_[l] = act_[l].cwiseProduct(drop_[l]);
            }
            in = &act_[l];
        }

        flat_ = to_flat(*in, n);
        return (flat_ * m_.dense_w).rowwise() + m_.dense_b;
    }

    void backward(const MatrixXd& g_logits) override {
        gdense_w_ = flat_.transpose() * g_logits;
        gdense_b_ = g_logits.colwise().sum();
        MatrixXd g = to_pixels(g_logits * m_.dense_w.transpose());

        for (size_t l = m_.conv_w.size(); l-- > 0;) {
            if (drop_[l].size() > 0) g = g.cwiseProduct(drop_[l]);
            g = g.cwiseProduct((pre_[l].array() > 0.0).cast<double>().matrix());
            const MatrixXd& in = l == 0 ? x_ : act_[l - 1];
            gconv_w_[l] = in.transpose() * g;
            gconv_b_[l] = g.colwise().sum();
            if (l > 0) g = g * m_.conv_w[l].transpose();
        }
    }

    std::vector<ParamView> params() override {
        std::vector<ParamView> out;
        for (size_t l = 0; l < m_.conv_w.size(); ++l) {
            out.push_back({m_.conv_w[l].data(), gconv_w_[l].data(),
                           static_cast<size_t>(m_.conv_w[l].size())});
            out.push_back({m_.conv_b[l].data(), gconv_b_[l].data(),
                           static_cast<size_t>(m_.conv_b[l].size())});
        }
        out.push_back({m_.dense_w.data(), gdense_w_.data(),
                       static_cast<size_t>(m_.dense_w.size())});
        out.push_back({m_.dense_b.data(), gdense_b_.data(),
                       static_cast<size_t>(m_.dense_b.size())});
        return out;
    }

private:
    double dropout_rate(size_t layer) const {
        // Dropout sits after conv-2 and conv-3 (the last two layers when the
        // stack is deeper or shallower than three).
        const size_t n = m_.conv_w.size();
        if (n >= 2 && layer == n - 2) return m_.dropout2;
        if (n >= 1 && layer == n - 1) return m_.dropout3;
        return 0.0;
    }

    // (n*P) x F  ->  n x (P*F), pixel-major feature-minor, matching Chip.
    MatrixXd to_flat(const MatrixXd& px, Eigen::Index n) const {
        const auto f = px.cols();
        MatrixXd out(n, positions_ * f);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index p = 0; p < positions_; ++p)
                out.block(i, p * f, 1, f) = px.row(i * positions_ + p);
        return out;
    }

    MatrixXd to_pixels(const MatrixXd& flat) const {
        const auto f = flat.cols() / positions_;
        MatrixXd out(flat.rows() * positions_, f);
        for (Eigen::Index i = 0; i < flat.rows(); ++i)
            for (Eigen::Index p = 0; p < positions_; ++p)
                out.row(i * positions_ + p) = flat.block(i, p * f, 1, f);
        return out;
    }

    CnnModel m_;
    const Eigen::Index positions_;
    MatrixXd x_, flat_;
    std::vector<MatrixXd> pre_, act_, drop_;
    std::vector<MatrixXd> gconv_w_;
    std::vector<RowVectorXd> gconv_b_;
    MatrixXd gdense_w_;
    RowVectorXd gdense_b_;
};

// ---------------------------------------------------------------------------
// training loop
// ---------------------------------------------------------------------------

std::vector<double> snapshot(Net& net) {
    std::vector<double> out;
    for (const auto& v : net.params())
        out.insert(out.end(), v.value, v.value + v.count);
    return out;
}

void restore(Net& net, const std::vector<double>& saved) {
    size_t at = 0;
    for (const auto& v : net.params()) {
        std::copy(saved.begin() + static_cast<std::ptrdiff_t>(at),
                  saved.begin() + static_cast<std::ptrdiff_t>(at + v.count),
                  v.value);
        at += v.count;
    }
}

struct Adam {
    explicit Adam(const std::vector<ParamView>& views, const TrainConfig& c)
        : config(c) {
        for (const auto& v : views) {
            m.emplace_back(std::vector<double>(v.count, 0.0));
            s.emplace_back(std::vector<double>(v.count, 0.0));
        }
    }

    void step(const std::vector<ParamView>& views) {
        ++t;
        const double bc1 = 1.0 - std::pow(config.beta1, t);
        const double bc2 = 1.0 - std::pow(config.beta2, t);
        for (size_t i = 0; i < views.size(); ++i) {
            auto& mi = m[i];
            auto& si = s[i];
            const auto& v = views[i];
            for (size_t j = 0; j < v.count; ++j) {
                const double g = v.grad[j];
                mi[j] = config.beta1 * mi[j] + (1.0 - config.beta1) * g;
                si[j] = config.beta2 * si[j] + (1.0 - config.beta2) * g * g;
                v.value[j] -= config.learning_rate * (mi[j] / bc1) /
                              (std::sqrt(si[j] / bc2) + config.epsilon);
            }
        }
    }

    const TrainConfig& config;
    std::vector<std::vector<double>> m, s;
    int t = 0;
};

LearningCurve fit_net(Net& net, const ChipDataset& train, const ChipDataset& val,
                      const TrainConfig& config) {
    config.validate();
    if (train.chips.empty() || val.chips.empty())
        throw EmptyInputError("training and validation sets must be non-empty");

    const MatrixXd train_x = net.prepare(train);
    const MatrixXd val_x = net.prepare(val);
    const std::vector<int> train_y = labels_of(train);
    const std::vector<int> val_y = labels_of(val);
    for (const auto* ys : {&train_y, &val_y})
        for (int y : *ys)
            if (y < 0 || y >= net.n_classes())
                throw ConfigError("label outside the model's class range");

    Rng rng(derive_seed(config.seed, "nn-train"));
    Adam adam(net.params(), config);
    LearningCurve curve;
    std::vector<double> best_params = snapshot(net);
    double best_acc = -1.0;

    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        size_t hit_sum = 0;
        for (size_t start = 0; start < order.size();
             start += static_cast<size_t>(config.batch_size)) {
            const size_t stop = std::min(
                order.size(), start + static_cast<size_t>(config.batch_size));
            const std::vector<size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(stop));
            std::vector<int> labels(rows.size());
            for (size_t i = 0; i < rows.size(); ++i)
                labels[i] = train_y[rows[i]];

            const MatrixXd logits =
                net.forward(net.gather(train_x, rows), true, &rng);
            const MatrixXd probs = softmax_rows(logits);
            const double loss = cross_entropy(probs, labels);
            if (!std::isfinite(loss))
                throw DivergenceError("training loss is not finite", epoch);
            loss_sum += loss * static_cast<double>(rows.size());
            hit_sum += count_hits(probs, labels);
            net.backward(ce_logit_grad(probs, labels));
            adam.step(net.params());
        }
        curve.train_loss.push_back(loss_sum / static_cast<double>(order.size()));
        curve.train_accuracy.push_back(static_cast<double>(hit_sum) /
                                       static_cast<double>(order.size()));

        const MatrixXd val_probs =
            softmax_rows(net.forward(val_x, false, nullptr));
        const double val_loss = cross_entropy(val_probs, val_y);
        if (!std::isfinite(val_loss))
            throw DivergenceError("validation loss is not finite", epoch);
        const double val_acc = static_cast<double>(count_hits(val_probs, val_y)) /
                               static_cast<double>(val_y.size());
        curve.val_loss.push_back(val_loss);
        curve.val_accuracy.push_back(val_acc);

        if (val_acc > best_acc) {
            best_acc = val_acc;
            curve.best_epoch = epoch;
            best_params = snapshot(net);
        }
        curve.epochs_run = epoch;
        if (epoch - curve.best_epoch >= config.patience) break;
    }
    restore(net, best_params);
    return curve;
}

Prediction predict_net(Net& net, const ChipDataset& chips) {
    const MatrixXd probs = softmax_rows(net.forward(net.prepare(chips), false,
                                                    nullptr));
    Prediction out;
    out.probabilities.reserve(static_cast<size_t>(probs.rows()));
    out.labels.reserve(static_cast<size_t>(probs.rows()));
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
        std::vector<double> row(static_cast<size_t>(probs.cols()));
        for (Eigen::Index c = 0; c < probs.cols(); ++c)
            row[static_cast<size_t>(c)] = probs(r, c);
        out.probabilities.push_back(std::move(row));
        out.labels.push_back(argmax_row(probs, r));
    }
    return out;
}

double check_net(Net& net, const ChipDataset& batch, double epsilon) {
    const MatrixXd x = net.prepare(batch);
    const std::vector<int> y = labels_of(batch);

    // Analytic gradients at the current parameters, dropout off.
    const MatrixXd probs = softmax_rows(net.forward(x, false, nullptr));
    net.backward(ce_logit_grad(probs, y));

    auto loss_at = [&]() {
        return cross_entropy(softmax_rows(net.forward(x, false, nullptr)), y);
    };

    double max_rel = 0.0;
    for (const auto& view : net.params()) {
        for (size_t j = 0; j < view.count; ++j) {
            const double saved = view.value[j];
            const double analytic = view.grad[j];
            view.value[j] = saved + epsilon;
            const double up = loss_at();
            view.value[j] = saved - epsilon;
            const double down = loss_at();
            view.value[j] = saved;
            const double numeric = (up - down) / (2.0 * epsilon);
            const double rel = std::abs(analytic - numeric) /
                               std::max({1.0, std::abs(analytic),
                                         std::abs(numeric)});
            max_rel = std::max(max_rel, rel);
        }
    }
    // backward() overwrote the cached gradients while probing; recompute so
    // the net is left consistent.
    net.forward(x, false, nullptr);
    return max_rel;
}

}  // namespace

// ---------------------------------------------------------------------------
// public API
// ---------------------------------------------------------------------------

size_t MlpModel::parameter_count() const {
    return static_cast<size_t>(w1.size()) + static_cast<size_t>(b1.size()) +
           static_cast<size_t>(w2.size()) + static_cast<size_t>(b2.size());
}

size_t CnnModel::parameter_count() const {
    size_t n = static_cast<size_t>(dense_w.size()) +
               static_cast<size_t>(dense_b.size());
    for (const auto& w : conv_w) n += static_cast<size_t>(w.size());
    for (const auto& b : conv_b) n += static_cast<size_t>(b.size());
    return n;
}

void TrainConfig::validate() const {
    if (learning_rate <= 0.0) throw ConfigError("learning rate must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw ConfigError("Adam betas must lie in [0, 1)");
    if (epsilon <= 0.0) throw ConfigError("Adam epsilon must be positive");
    if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (patience < 1 || patience >= max_epochs)
        throw ConfigError("patience must satisfy 1 <= patience < max_epochs");
    if (val_fraction <= 0.0 || val_fraction >= 1.0)
        throw ConfigError("val_fraction must lie in (0, 1)");
}

MlpModel make_mlp(int input_dim, int hidden, int n_classes, uint64_t seed) {
    if (input_dim < 1 || hidden < 1 || n_classes < 2)
        throw ConfigError("MLP needs positive dims and at least 2 classes");
    Rng rng(derive_seed(seed, "mlp-init"));
    MlpModel m;
    m.input_dim = input_dim;
    m.hidden = hidden;
    m.n_classes = n_classes;
    m.w1.resize(input_dim, hidden);
    glorot_fill(m.w1.data(), static_cast<size_t>(m.w1.size()), input_dim,
                hidden, rng);
    m.b1.setZero(hidden);
    m.w2.resize(hidden, n_classes);
    glorot_fill(m.w2.data(), static_cast<size_t>(m.w2.size()), hidden,
                n_classes, rng);
    m.b2.setZero(n_classes);
    return m;
}

CnnModel make_cnn(int chip_size, int channels, std::vector<int> conv_channels,
                  int n_classes, uint64_t seed) {
    if (chip_size < 1 || chip_size % 2 == 0)
        throw ConfigError("chip size must be odd and positive");
    if (channels < 1 || n_classes < 2 || conv_channels.empty())
        throw ConfigError("CNN needs channels, conv layers, and >= 2 classes");
    for (int c : conv_channels)
        if (c < 1) throw ConfigError("conv layer widths must be positive");

    Rng rng(derive_seed(seed, "cnn-init"));
    CnnModel m;
    m.chip_size = chip_size;
    m.channels = channels;
    m.n_classes = n_classes;
    m.conv_channels = std::move(conv_channels);

    int in = channels;
    for (int out : m.conv_channels) {
        Eigen::MatrixXd w(in, out);
        glorot_fill(w.data(), static_cast<size_t>(w.size()), in, out, rng);
        m.conv_w.push_back(std::move(w));
        Eigen::RowVectorXd b;
        b.setZero(out);
        m.conv_b.push_back(std::move(b));
        in = out;
    }
    const int flat = chip_size * chip_size * in;
    m.dense_w.resize(flat, n_classes);
    glorot_fill(m.dense_w.data(), static_cast<size_t>(m.dense_w.size()), flat,
                n_classes, rng);
    m.dense_b.setZero(n_classes);
    return m;
}

std::pair<MlpModel, LearningCurve> nn_fit(const MlpModel& init,
                                          const ChipDataset& train,
                                          const ChipDataset& val,
                                          const TrainConfig& config) {
    MlpNet net(init);
    LearningCurve curve = fit_net(net, train, val, config);
    return {net.model(), curve};
}

std::pair<CnnModel, LearningCurve> nn_fit(const CnnModel& init,
                                          const ChipDataset& train,
                                          const ChipDataset& val,
                                          const TrainConfig& config) {
    CnnNet net(init);
    LearningCurve curve = fit_net(net, train, val, config);
    return {net.model(), curve};
}

Prediction nn_predict(const MlpModel& model, const ChipDataset& chips) {
    MlpNet net(model);
    return predict_net(net, chips);
}

Prediction nn_predict(const CnnModel& model, const ChipDataset& chips) {
    CnnNet net(model);
    return predict_net(net, chips);
}

double gradient_check(const MlpModel& model, const ChipDataset& batch,
                      double epsilon) {
    MlpNet net(model);
    return check_net(net, batch, epsilon);
}

double gradient_check(const CnnModel& model, const ChipDataset& batch,
                      double epsilon) {
    CnnNet net(model);
    return check_net(net, batch, epsilon);
}

}  // namespace landkit
