#include "rfsf/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_map>

#include "rfsf/errors.hpp"
#include "rfsf/parallel.hpp"

namespace rfsf {

namespace {

constexpr int kGradBlocks = 8;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Per-block gradient sink; merged in block order for bit-exact results.
struct GradBuffer {
    std::unordered_map<Param*, Tensor> grads;

    void add(Param* p, const Tensor& g) {
        auto it = grads.find(p);
        if (it == grads.end()) {
            grads.emplace(p, g);
            return;
        }
        Tensor& acc = it->second;
        for (int64_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
    }
};

void merge_buffers(const std::vector<Param*>& params, std::vector<GradBuffer>& buffers) {
    for (Param* p : params) {
        for (auto& buf : buffers) {
            auto it = buf.grads.find(p);
            if (it == buf.grads.end()) continue;
            for (int64_t i = 0; i < p->grad.size(); ++i) p->grad[i] += it->second[i];
        }
    }
}

Tensor flatten_bag(const Tensor& bag) {
    return Tensor({1, static_cast<int>(bag.size())},
                  std::vector<double>(bag.data(), bag.data() + bag.size()));
}

int argmax(const Tensor& v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

Tensor draw_noise(int dim, Rng& rng) {
    Tensor z({dim});
    for (int i = 0; i < dim; ++i) z[i] = rng.normal();
    return z;
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
    if (lr_d <= 0.0 || lr_g <= 0.0) throw ConfigError("train: learning rates must be positive");
    if (lambda_cls < 0.0 || lambda_mil < 0.0) throw ConfigError("train: loss weights must be >= 0");
    if (augment_ratio < 0.0) throw ConfigError("train: augment ratio must be >= 0");
    if (jobs < 1) throw ConfigError("train: jobs must be >= 1");
}

void save_history_csv(const std::filesystem::path& path, const TrainHistory& history) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("save_history_csv: cannot open '" + path.string() + "'");
    out << "epoch,d_loss,g_loss,d_src_acc,d_cls_acc,g_mil_acc,seconds\n";
    out.precision(12);
    for (const auto& r : history.records) {
        out << r.epoch << "," << r.d_loss << "," << r.g_loss << "," << r.d_src_acc << ","
            << r.d_cls_acc << "," << r.g_mil_acc << "," << r.seconds << "\n";
    }
}

// ---- losses ------------------------------------------------------------------

Var disc_pair_loss(DiscriminatorNet& disc, const Tensor& real_bag, int real_label,
                   const Tensor& fake_bag, double lambda_cls) {
    DiscForward real_fwd = disc.forward(Var::constant(flatten_bag(real_bag)));
    DiscForward fake_fwd = disc.forward(Var::constant(flatten_bag(fake_bag)));
    Var src_real = bce_with_logits(real_fwd.source_logit, {1.0});
    Var src_fake = bce_with_logits(fake_fwd.source_logit, {0.0});
    Var loss = scale(add(src_real, src_fake), 0.5);
    if (lambda_cls != 0.0) {
        Var ce = cross_entropy(reshape(real_fwd.class_logits, {1, disc.config().n_classes}),
                               {real_label});
        loss = add(loss, scale(ce, lambda_cls));
    }
    return loss;
}

double discriminator_loss(DiscriminatorNet& disc, const std::vector<const WindowedBag*>& real,
                          const std::vector<Tensor>& fake, double lambda_cls) {
    if (real.empty() || real.size() != fake.size()) {
        throw ContractError("discriminator_loss: real and fake batches must be non-empty and equal");
    }
    double acc = 0.0;
    for (size_t i = 0; i < real.size(); ++i) {
        acc += disc_pair_loss(disc, real[i]->instances, real[i]->label.index, fake[i], lambda_cls)
                   .value()
                   .item();
    }
    return acc / static_cast<double>(real.size());
}

Var gen_sample_loss(DiscriminatorNet& disc, const GenForward& fake, int cond_label,
                    double lambda_cls, double lambda_mil) {
    const Tensor& bag = fake.bag.value();
    Var flat = reshape(fake.bag, {1, static_cast<int>(bag.size())});
    DiscForward fwd = disc.forward(flat);
    Var loss = bce_with_logits(fwd.source_logit, {1.0});  // non-saturating
    if (lambda_cls != 0.0) {
        Var ce = cross_entropy(reshape(fwd.class_logits, {1, disc.config().n_classes}), {cond_label});
        loss = add(loss, scale(ce, lambda_cls));
    }
    if (lambda_mil != 0.0 && fake.has_mil) {
        loss = add(loss, scale(nll_normalized_probs(fake.mil.bag_pred, cond_label), lambda_mil));
    }
    return loss;
}

double generator_loss(GeneratorBase& gen, DiscriminatorNet& disc, const std::vector<Tensor>& zs,
                      const std::vector<int>& cond_labels, double lambda_cls, double lambda_mil) {
    if (zs.empty() || zs.size() != cond_labels.size()) {
        throw ContractError("generator_loss: batch must be non-empty with matching labels");
    }
    double acc = 0.0;
    for (size_t i = 0; i < zs.size(); ++i) {
        GenForward f = gen.generate(zs[i], cond_labels[i]);
        acc += gen_sample_loss(disc, f, cond_labels[i], lambda_cls, lambda_mil).value().item();
    }
    return acc / static_cast<double>(zs.size());
}

// ---- cGAN loop ------------------------------------------------------------------

namespace {

void check_dataset(const BagDataset& data, const ModelConfig& mcfg, const TrainConfig& tcfg) {
    if (static_cast<int>(data.bags.size()) < tcfg.batch_size) {
        throw ConfigError("train: dataset has " + std::to_string(data.bags.size()) +
                          " bags, need >= batch size " + std::to_string(tcfg.batch_size));
    }
    if (data.n_classes < 2) throw ConfigError("train: need at least 2 classes");
    if (data.n_classes != mcfg.n_classes) {
        throw ConfigError("train: dataset has " + std::to_string(data.n_classes) +
                          " classes, model expects " + std::to_string(mcfg.n_classes));
    }
    if (data.bag_size != mcfg.bag_size || data.instance_dim != mcfg.instance_dim) {
        throw ConfigError("train: bag geometry " + std::to_string(data.bag_size) + "x" +
                          std::to_string(data.instance_dim) + " does not match model " +
                          std::to_string(mcfg.bag_size) + "x" + std::to_string(mcfg.instance_dim));
    }
    std::vector<int> hist(static_cast<size_t>(data.n_classes), 0);
    for (const auto& b : data.bags) hist[static_cast<size_t>(b.label.index)]++;
    for (int c = 0; c < data.n_classes; ++c) {
        if (hist[static_cast<size_t>(c)] == 0) {
            throw ConfigError("train: class " + std::to_string(c) + " has no bags");
        }
    }
}

void check_finite(double loss, const char* which, int epoch, int batch) {
    if (!std::isfinite(loss)) {
        throw NumericalError(std::string(which) + " loss is non-finite at epoch " +
                             std::to_string(epoch) + ", batch " + std::to_string(batch));
    }
}

}  // namespace

CganResult train_cgan(const BagDataset& data, const ModelConfig& mcfg, const TrainConfig& tcfg) {
    mcfg.validate();
    tcfg.validate();
    check_dataset(data, mcfg, tcfg);

    Rng master(tcfg.seed);
    Rng init_g = master.split(1);
    Rng init_d = master.split(2);

    CganResult result;
    result.generator = make_generator(mcfg, init_g);
    result.discriminator = std::make_unique<DiscriminatorNet>(mcfg, init_d);
    GeneratorBase& gen = *result.generator;
    DiscriminatorNet& disc = *result.discriminator;

    std::vector<Param*> gen_params = gen.parameters();
    std::vector<Param*> disc_params = disc.parameters();
    AdamOptimizer opt_g(gen_params, tcfg.lr_g, tcfg.beta1, tcfg.beta2, tcfg.adam_eps);
    AdamOptimizer opt_d(disc_params, tcfg.lr_d, tcfg.beta1, tcfg.beta2, tcfg.adam_eps);

    int n = static_cast<int>(data.bags.size());
    int n_batches = n / tcfg.batch_size;
    int bsz = tcfg.batch_size;

    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        auto t0 = Clock::now();
        Rng erng = master.split(1000 + static_cast<uint64_t>(epoch));
        std::vector<int> order(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
        erng.shuffle(order);

        double d_loss_sum = 0.0, g_loss_sum = 0.0;
        int64_t src_correct = 0, cls_correct = 0, mil_correct = 0;
        int64_t src_total = 0, cls_total = 0, mil_total = 0;

        for (int batch = 0; batch < n_batches; ++batch) {
            // ---- discriminator step
            std::vector<Tensor> z_d(static_cast<size_t>(bsz));
            std::vector<int> y_d(static_cast<size_t>(bsz));
            for (int i = 0; i < bsz; ++i) {
                z_d[static_cast<size_t>(i)] = draw_noise(mcfg.noise_dim, erng);
                y_d[static_cast<size_t>(i)] = erng.uniform_int(mcfg.n_classes);
            }
            opt_d.zero_grad();
            std::vector<GradBuffer> buffers(kGradBlocks);
            std::vector<double> losses(static_cast<size_t>(bsz));
            std::vector<int8_t> src_real_ok(static_cast<size_t>(bsz)), src_fake_ok(static_cast<size_t>(bsz)),
                cls_ok(static_cast<size_t>(bsz));
            parallel_blocks(bsz, kGradBlocks, tcfg.jobs, [&](int block, int begin, int end) {
                GradBuffer& buf = buffers[static_cast<size_t>(block)];
                LeafScope scope;
                for (int i = begin; i < end; ++i) {
                    const WindowedBag& real = data.bags[static_cast<size_t>(
                        order[static_cast<size_t>(batch * bsz + i)])];
                    Tensor fake = gen.generate(z_d[static_cast<size_t>(i)], y_d[static_cast<size_t>(i)])
                                      .bag.value();
                    DiscForward rf = disc.forward(Var::constant(flatten_bag(real.instances)));
                    DiscForward ff = disc.forward(Var::constant(flatten_bag(fake)));
                    Var src = scale(add(bce_with_logits(rf.source_logit, {1.0}),
                                        bce_with_logits(ff.source_logit, {0.0})),
                                    0.5);
                    Var loss = src;
                    if (tcfg.lambda_cls != 0.0) {
                        Var ce = cross_entropy(reshape(rf.class_logits, {1, mcfg.n_classes}),
                                               {real.label.index});
                        loss = add(loss, scale(ce, tcfg.lambda_cls));
                    }
                    losses[static_cast<size_t>(i)] = loss.value().item();
                    backward_graph_only(scale(loss, 1.0 / bsz));
                    src_real_ok[static_cast<size_t>(i)] = rf.source_logit.value()[0] > 0.0 ? 1 : 0;
                    src_fake_ok[static_cast<size_t>(i)] = ff.source_logit.value()[0] <= 0.0 ? 1 : 0;
                    cls_ok[static_cast<size_t>(i)] =
                        argmax(rf.class_logits.value()) == real.label.index ? 1 : 0;
                }
                scope.harvest([&buf](Param* p, const Tensor& g) { buf.add(p, g); });
            });
            merge_buffers(disc_params, buffers);
            double d_batch = 0.0;
            for (int i = 0; i < bsz; ++i) d_batch += losses[static_cast<size_t>(i)];
            d_batch /= bsz;
            check_finite(d_batch, "discriminator", epoch, batch);
            d_loss_sum += d_batch;
            opt_d.step();
            for (int i = 0; i < bsz; ++i) {
                src_correct += src_real_ok[static_cast<size_t>(i)] + src_fake_ok[static_cast<size_t>(i)];
                cls_correct += cls_ok[static_cast<size_t>(i)];
            }
            src_total += 2 * bsz;
            cls_total += bsz;

            // ---- generator step
            std::vector<Tensor> z_g(static_cast<size_t>(bsz));
            std::vector<int> y_g(static_cast<size_t>(bsz));
            for (int i = 0; i < bsz; ++i) {
                z_g[static_cast<size_t>(i)] = draw_noise(mcfg.noise_dim, erng);
                y_g[static_cast<size_t>(i)] = erng.uniform_int(mcfg.n_classes);
            }
            opt_g.zero_grad();
            for (auto& buf : buffers) buf.grads.clear();
            std::vector<int8_t> mil_ok(static_cast<size_t>(bsz));
            parallel_blocks(bsz, kGradBlocks, tcfg.jobs, [&](int block, int begin, int end) {
                GradBuffer& buf = buffers[static_cast<size_t>(block)];
                LeafScope scope;
                for (int i = begin; i < end; ++i) {
                    GenForward f = gen.generate(z_g[static_cast<size_t>(i)], y_g[static_cast<size_t>(i)]);
                    Var loss = gen_sample_loss(disc, f, y_g[static_cast<size_t>(i)], tcfg.lambda_cls,
                                               tcfg.lambda_mil);
                    losses[static_cast<size_t>(i)] = loss.value().item();
                    backward_graph_only(scale(loss, 1.0 / bsz));
                    if (f.has_mil) {
                        mil_ok[static_cast<size_t>(i)] =
                            argmax(f.mil.bag_pred.value()) == y_g[static_cast<size_t>(i)] ? 1 : 0;
                    } else {
                        mil_ok[static_cast<size_t>(i)] = 0;
                    }
                }
                scope.harvest([&buf](Param* p, const Tensor& g) { buf.add(p, g); });
            });
            merge_buffers(gen_params, buffers);
            double g_batch = 0.0;
            for (int i = 0; i < bsz; ++i) g_batch += losses[static_cast<size_t>(i)];
            g_batch /= bsz;
            check_finite(g_batch, "generator", epoch, batch);
            g_loss_sum += g_batch;
            opt_g.step();
            for (int i = 0; i < bsz; ++i) mil_correct += mil_ok[static_cast<size_t>(i)];
            mil_total += bsz;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.d_loss = n_batches > 0 ? d_loss_sum / n_batches : 0.0;
        rec.g_loss = n_batches > 0 ? g_loss_sum / n_batches : 0.0;
        rec.d_src_acc = src_total > 0 ? static_cast<double>(src_correct) / src_total : 0.0;
        rec.d_cls_acc = cls_total > 0 ? static_cast<double>(cls_correct) / cls_total : 0.0;
        rec.g_mil_acc = mil_total > 0 ? static_cast<double>(mil_correct) / mil_total : 0.0;
        rec.seconds = seconds_since(t0);
        result.history.records.push_back(rec);
    }
    return result;
}

// ---- classifier ---------------------------------------------------------------------

ClassifierResult train_classifier(const BagDataset& data, const ModelConfig& mcfg,
                                  const TrainConfig& tcfg) {
    mcfg.validate();
    tcfg.validate();
    check_dataset(data, mcfg, tcfg);

    Rng master(tcfg.seed);
    Rng init = master.split(3);
    ClassifierResult result;
    result.classifier = std::make_unique<GeneratorNet>(mcfg, init);
    GeneratorNet& clf = *result.classifier;

    std::vector<Param*> params = clf.parameters();
    AdamOptimizer opt(params, tcfg.lr_g, tcfg.beta1, tcfg.beta2, tcfg.adam_eps);

    int n = static_cast<int>(data.bags.size());
    int bsz = tcfg.batch_size;
    int n_batches = n / bsz;

    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        auto t0 = Clock::now();
        Rng erng = master.split(5000 + static_cast<uint64_t>(epoch));
        std::vector<int> order(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
        erng.shuffle(order);

        double loss_sum = 0.0;
        int64_t correct = 0, total = 0;
        for (int batch = 0; batch < n_batches; ++batch) {
            opt.zero_grad();
            std::vector<GradBuffer> buffers(kGradBlocks);
            std::vector<double> losses(static_cast<size_t>(bsz));
            std::vector<int8_t> ok(static_cast<size_t>(bsz));
            parallel_blocks(bsz, kGradBlocks, tcfg.jobs, [&](int block, int begin, int end) {
                GradBuffer& buf = buffers[static_cast<size_t>(block)];
                LeafScope scope;
                for (int i = begin; i < end; ++i) {
                    const WindowedBag& bag = data.bags[static_cast<size_t>(
                        order[static_cast<size_t>(batch * bsz + i)])];
                    ClfForward f = clf.classify(bag.instances);
                    Var loss = nll_normalized_probs(f.mil.bag_pred, bag.label.index);
                    losses[static_cast<size_t>(i)] = loss.value().item();
                    backward_graph_only(scale(loss, 1.0 / bsz));
                    ok[static_cast<size_t>(i)] =
                        argmax(f.mil.bag_pred.value()) == bag.label.index ? 1 : 0;
                }
                scope.harvest([&buf](Param* p, const Tensor& g) { buf.add(p, g); });
            });
            merge_buffers(params, buffers);
            double batch_loss = 0.0;
            for (int i = 0; i < bsz; ++i) batch_loss += losses[static_cast<size_t>(i)];
            batch_loss /= bsz;
            check_finite(batch_loss, "classifier", epoch, batch);
            loss_sum += batch_loss;
            opt.step();
            for (int i = 0; i < bsz; ++i) correct += ok[static_cast<size_t>(i)];
            total += bsz;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.g_loss = n_batches > 0 ? loss_sum / n_batches : 0.0;
        rec.g_mil_acc = total > 0 ? static_cast<double>(correct) / total : 0.0;
        rec.seconds = seconds_since(t0);
        result.history.records.push_back(rec);
    }
    return result;
}

// ---- augmentation ----------------------------------------------------------------------

BagDataset augment_dataset(const BagDataset& real, GeneratorBase& gen, double ratio,
                           uint64_t seed) {
    if (ratio < 0.0) throw ContractError("augment_dataset: ratio must be >= 0");
    BagDataset out = real;
    int64_t n_add = static_cast<int64_t>(std::llround(ratio * static_cast<double>(real.bags.size())));
    if (n_add == 0) return out;

    // Per-class targets via largest remainder so the histogram scales evenly.
    int k = real.n_classes;
    std::vector<int64_t> hist(static_cast<size_t>(k), 0);
    for (const auto& b : real.bags) hist[static_cast<size_t>(b.label.index)]++;
    std::vector<int64_t> target(static_cast<size_t>(k), 0);
    std::vector<std::pair<double, int>> remainders;
    int64_t assigned = 0;
    for (int c = 0; c < k; ++c) {
        double exact = static_cast<double>(n_add) * static_cast<double>(hist[static_cast<size_t>(c)]) /
                       static_cast<double>(real.bags.size());
        target[static_cast<size_t>(c)] = static_cast<int64_t>(exact);
        assigned += target[static_cast<size_t>(c)];
        remainders.emplace_back(exact - std::floor(exact), c);
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (int64_t i = 0; assigned < n_add; ++i, ++assigned) {
        target[static_cast<size_t>(remainders[static_cast<size_t>(i) % remainders.size()].second)]++;
    }

    Rng rng(splitmix64(seed ^ 0xA46ULL));
    int source_id = 1 << 20;  // synthetic bags get their own id range
    for (int c = 0; c < k; ++c) {
        for (int64_t i = 0; i < target[static_cast<size_t>(c)]; ++i) {
            Tensor z = draw_noise(gen.config().noise_dim, rng);
            WindowedBag bag;
            bag.instances = gen.generate(z, c).bag.value();
            bag.label.set = real.bags.empty() ? LabelSet::Synth3 : real.bags[0].label.set;
            bag.label.index = c;
            bag.source_id = source_id++;
            bag.synthetic = true;
            out.bags.push_back(std::move(bag));
        }
    }
    return out;
}

}  // namespace rfsf
