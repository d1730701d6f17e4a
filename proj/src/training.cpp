#include "partgraph/training.hpp"

#include "partgraph/errors.hpp"
#include "partgraph/rng.hpp"
#include "partgraph/textio.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <utility>

namespace partgraph {

namespace {

constexpr std::uint64_t kTrainStream = 0x74726169; // distinct from init streams

struct GraphBatchItem {
    Matrix points;
    Matrix mask;
    Index n_parts = 0;
};

GraphBatchItem prepare(const FeaturizedGraph& graph) {
    GraphBatchItem item;
    item.points = stack_parts(graph);
    item.n_parts = static_cast<Index>(graph.parts.size());
    item.mask = nn::adjacency_mask(item.n_parts, graph.edges);
    return item;
}

Index argmax_index(const Vector& v) {
    Index best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i) {
        if (v(i) > v(best)) {
            best = i;
        }
    }
    return best;
}

Metrics metrics_from_confusion(IndexMatrix confusion) {
    Metrics m;
    const Index total = confusion.sum();
    const Index correct = confusion.diagonal().sum();
    m.accuracy = total > 0 ? static_cast<Scalar>(correct) / static_cast<Scalar>(total) : 0.0;

    Scalar class_sum = 0.0;
    Index classes_present = 0;
    for (Eigen::Index r = 0; r < confusion.rows(); ++r) {
        const Index row_total = confusion.row(r).sum();
        if (row_total > 0) {
            class_sum += static_cast<Scalar>(confusion(r, r)) / static_cast<Scalar>(row_total);
            ++classes_present;
        }
    }
    m.class_accuracy = classes_present > 0 ? class_sum / static_cast<Scalar>(classes_present)
                                           : 0.0;
    m.confusion = std::move(confusion);
    return m;
}

// Adam and SGD-with-momentum over the model's named parameters.
class OptimizerState {
public:
    OptimizerState(std::vector<std::pair<std::string, nn::Param*>> params,
                   const TrainConfig& cfg)
        : params_(std::move(params)), cfg_(cfg) {
        first_.reserve(params_.size());
        second_.reserve(params_.size());
        for (const auto& [name, p] : params_) {
            first_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
            second_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        }
    }

    void step() {
        constexpr Scalar beta1 = 0.9;
        constexpr Scalar beta2 = 0.999;
        constexpr Scalar adam_eps = 1e-8;
        constexpr Scalar momentum = 0.9;
        ++t_;
        for (std::size_t i = 0; i < params_.size(); ++i) {
            nn::Param& p = *params_[i].second;
            if (cfg_.optimizer == Optimizer::Adam) {
                first_[i] = beta1 * first_[i] + (1 - beta1) * p.grad;
                second_[i] = (beta2 * second_[i]).array() +
                             (1 - beta2) * p.grad.array().square();
                const Scalar c1 = 1 - std::pow(beta1, static_cast<Scalar>(t_));
                const Scalar c2 = 1 - std::pow(beta2, static_cast<Scalar>(t_));
                p.value.array() -= cfg_.learning_rate * (first_[i].array() / c1) /
                                   ((second_[i].array() / c2).sqrt() + adam_eps);
            } else {
                first_[i] = momentum * first_[i] + p.grad;
                p.value -= cfg_.learning_rate * first_[i];
            }
        }
    }

private:
    std::vector<std::pair<std::string, nn::Param*>> params_;
    TrainConfig cfg_;
    std::vector<Matrix> first_;
    std::vector<Matrix> second_;
    long t_ = 0;
};

struct Snapshot {
    std::vector<Matrix> params;
    std::vector<Matrix> state;
};

Snapshot take_snapshot(nn::PartGnn& model) {
    Snapshot s;
    for (const auto& [name, p] : model.named_params()) {
        s.params.push_back(p->value);
    }
    for (const auto& [name, m] : model.named_state()) {
        s.state.push_back(*m);
    }
    return s;
}

void restore_snapshot(nn::PartGnn& model, const Snapshot& s) {
    const auto params = model.named_params();
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i].second->value = s.params[i];
    }
    const auto state = model.named_state();
    for (std::size_t i = 0; i < state.size(); ++i) {
        *state[i].second = s.state[i];
    }
}

} // namespace

GraphDataset make_graph_dataset(std::vector<FeaturizedGraph> graphs,
                                std::vector<std::string> class_names) {
    GraphDataset ds;
    ds.class_names = std::move(class_names);
    std::map<std::string, Index> index;
    for (std::size_t i = 0; i < ds.class_names.size(); ++i) {
        index[ds.class_names[i]] = static_cast<Index>(i);
    }
    ds.labels.reserve(graphs.size());
    for (const FeaturizedGraph& g : graphs) {
        const auto it = index.find(g.label);
        if (it == index.end()) {
            throw ConfigError("graph '" + g.object_id + "' has unknown class '" + g.label +
                              "'");
        }
        ds.labels.push_back(it->second);
    }
    ds.graphs = std::move(graphs);
    return ds;
}

Scalar cross_entropy_loss(const Vector& probs, Index label) {
    if (label < 0 || label >= probs.size()) {
        throw ShapeMismatchError("label " + std::to_string(label) + " outside " +
                                 std::to_string(probs.size()) + " classes");
    }
    return -std::log(std::max(probs(label), Scalar(1e-12)));
}

Vector cross_entropy_logit_grad(const Vector& probs, Index label) {
    Vector grad = probs;
    grad(label) -= 1.0;
    return grad;
}

std::string format_epoch_log(const EpochLog& log) {
    return std::to_string(log.epoch) + '\t' + format_double(log.loss) + '\t' +
           format_double(log.train_acc) + '\t' + format_double(log.val_acc);
}

TrainResult train(nn::PartGnn& model, const GraphDataset& train_set,
                  const GraphDataset& val_set, const TrainConfig& cfg,
                  void (*on_epoch)(const EpochLog&)) {
    if (train_set.empty()) {
        throw ConfigError("training set is empty");
    }
    if (cfg.epochs < 1 || cfg.learning_rate <= 0 || cfg.batch_size < 1) {
        throw ConfigError("training needs epochs >= 1, learning_rate > 0, batch_size >= 1");
    }
    for (const Index label : train_set.labels) {
        if (label >= model.config().n_classes) {
            throw ConfigError("label outside the model's class count");
        }
    }

    std::vector<GraphBatchItem> items;
    items.reserve(train_set.size());
    for (const FeaturizedGraph& g : train_set.graphs) {
        items.push_back(prepare(g));
    }
    // Each optimizer batch is stacked into one forward pass, so every graph
    // must share the feature width and per-part point count.
    for (const GraphBatchItem& item : items) {
        if (item.n_parts < 1) {
            throw EmptyGraphError("training graph has no parts");
        }
        if (item.points.rows() % item.n_parts != 0 ||
            item.points.cols() != items.front().points.cols() ||
            item.points.rows() * items.front().n_parts !=
                items.front().points.rows() * item.n_parts) {
            throw ShapeMismatchError(
                "training graphs must share the feature width and per-part point count");
        }
    }

    OptimizerState optimizer(model.named_params(), cfg);
    Rng rng(Rng::mix(cfg.seed, kTrainStream));
    TrainResult result;
    Snapshot last_good = take_snapshot(model);

    std::vector<std::size_t> order(items.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }

    for (Index epoch = 1; epoch <= cfg.epochs; ++epoch) {
        // Seeded Fisher-Yates shuffle.
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
            std::swap(order[i - 1], order[j]);
        }

        Scalar epoch_loss = 0.0;
        std::size_t correct = 0;
        bool diverged = false;

        for (std::size_t start = 0; start < order.size() && !diverged;
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const auto batch_n = static_cast<Scalar>(stop - start);
            model.zero_grad();

            // Stack the batch's graphs into one pass so batch norm draws its
            // statistics from the whole batch; the block-diagonal mask keeps
            // attention within each graph.
            std::vector<Index> part_counts;
            std::vector<Matrix> masks;
            part_counts.reserve(stop - start);
            masks.reserve(stop - start);
            Eigen::Index total_rows = 0;
            for (std::size_t b = start; b < stop; ++b) {
                const GraphBatchItem& item = items[order[b]];
                part_counts.push_back(item.n_parts);
                masks.push_back(cfg.disconnect_rate > 0
                                    ? nn::apply_disconnection(item.mask, cfg.disconnect_rate,
                                                              rng)
                                    : item.mask);
                total_rows += item.points.rows();
            }
            Matrix points(total_rows, items[order[start]].points.cols());
            Eigen::Index point_row = 0;
            for (std::size_t b = start; b < stop; ++b) {
                const Matrix& item_points = items[order[b]].points;
                points.middleRows(point_row, item_points.rows()) = item_points;
                point_row += item_points.rows();
            }

            nn::GnnCache cache;
            const std::vector<nn::GnnOutput> outputs = model.forward_batch(
                points, part_counts, nn::block_diagonal_mask(masks), nn::Mode::Train, &cache);

            const bool max_pool = model.config().pooling == nn::Pooling::MaxPool;
            Matrix dlogits = Matrix::Zero(
                max_pool ? static_cast<Eigen::Index>(outputs.size()) : cache.n_parts,
                model.config().n_classes);
            Eigen::Index dlogit_row = 0;
            for (std::size_t b = start; b < stop; ++b) {
                const std::size_t g = b - start;
                const nn::GnnOutput& out = outputs[g];
                const Index label = train_set.labels[order[b]];

                Scalar loss;
                if (max_pool) {
                    loss = cross_entropy_loss(out.object_probs, label);
                    dlogits.row(static_cast<Eigen::Index>(g)) =
                        cross_entropy_logit_grad(out.object_probs, label).transpose() /
                        batch_n;
                } else {
                    // Every node learns to predict the object's class; the
                    // loss is the mean over nodes.
                    const auto n_parts = static_cast<Scalar>(part_counts[g]);
                    loss = 0.0;
                    Matrix d = out.node_probs;
                    for (Eigen::Index p = 0; p < d.rows(); ++p) {
                        loss += cross_entropy_loss(out.node_probs.row(p).transpose(), label);
                        d(p, label) -= 1.0;
                    }
                    loss /= n_parts;
                    dlogits.middleRows(dlogit_row, d.rows()) = d / (n_parts * batch_n);
                    dlogit_row += d.rows();
                }

                if (!std::isfinite(loss)) {
                    diverged = true;
                    break;
                }
                epoch_loss += loss;
                if (argmax_index(out.object_probs) == label) {
                    ++correct;
                }
            }
            if (!diverged) {
                model.backward(cache, dlogits);
                optimizer.step();
            }
        }

        if (diverged) {
            restore_snapshot(model, last_good);
            result.diverged = true;
            break;
        }
        last_good = take_snapshot(model);

        EpochLog log;
        log.epoch = epoch;
        log.loss = epoch_loss / static_cast<Scalar>(items.size());
        log.train_acc = static_cast<Scalar>(correct) / static_cast<Scalar>(items.size());
        log.val_acc = val_set.empty() ? std::numeric_limits<Scalar>::quiet_NaN()
                                      : evaluate(model, val_set).accuracy;
        result.log.push_back(log);
        if (on_epoch) {
            on_epoch(log);
        }

        const bool train_ok = log.train_acc >= cfg.early_stop_train_acc;
        const bool val_ok = val_set.empty() || log.val_acc >= cfg.early_stop_val_acc;
        if (train_ok && val_ok) {
            break;
        }
    }
    return result;
}

Metrics evaluate(nn::PartGnn& model, const GraphDataset& dataset) {
    const Index n_classes = model.config().n_classes;
    IndexMatrix confusion = IndexMatrix::Zero(n_classes, n_classes);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const GraphBatchItem item = prepare(dataset.graphs[i]);
        const nn::GnnOutput out =
            model.forward(item.points, item.n_parts, item.mask, nn::Mode::Eval);
        const Index truth = dataset.labels[i];
        if (truth < 0 || truth >= n_classes) {
            throw ConfigError("dataset label outside the model's class count");
        }
        confusion(truth, argmax_index(out.object_probs)) += 1;
    }
    return metrics_from_confusion(std::move(confusion));
}

Metrics majority_class_baseline(const GraphDataset& dataset) {
    if (dataset.empty()) {
        throw ConfigError("baseline needs a non-empty dataset");
    }
    const auto n_classes = static_cast<Index>(dataset.class_names.size());
    std::vector<Index> counts(static_cast<std::size_t>(n_classes), 0);
    for (const Index label : dataset.labels) {
        counts[static_cast<std::size_t>(label)] += 1;
    }
    Index majority = 0;
    for (Index c = 1; c < n_classes; ++c) {
        if (counts[static_cast<std::size_t>(c)] > counts[static_cast<std::size_t>(majority)]) {
            majority = c;
        }
    }
    IndexMatrix confusion = IndexMatrix::Zero(n_classes, n_classes);
    for (const Index label : dataset.labels) {
        confusion(label, majority) += 1;
    }
    return metrics_from_confusion(std::move(confusion));
}

} // namespace partgraph
