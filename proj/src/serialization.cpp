#include "partgraph/serialization.hpp"

#include "partgraph/errors.hpp"
#include "partgraph/textio.hpp"

#include <string>

namespace partgraph {

namespace {

const char* kGraphMagic = "partgraph.graph";
const char* kCheckpointMagic = "partgraph.checkpoint";

void append_matrix(std::string& out, const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c > 0) {
                out += ' ';
            }
            out += format_double(m(r, c));
        }
        out += '\n';
    }
}

std::string lrf_name(LrfMode mode) {
    return mode == LrfMode::Pca ? "pca" : "z";
}

LrfMode lrf_from_name(std::string_view name) {
    if (name == "pca") {
        return LrfMode::Pca;
    }
    if (name == "z") {
        return LrfMode::Z;
    }
    throw ParseError("unknown frame mode '" + std::string(name) + "'");
}

std::string pooling_name(nn::Pooling pooling) {
    return pooling == nn::Pooling::MaxPool ? "maxpool" : "singlenode";
}

nn::Pooling pooling_from_name(std::string_view name) {
    if (name == "maxpool") {
        return nn::Pooling::MaxPool;
    }
    if (name == "singlenode") {
        return nn::Pooling::SingleNode;
    }
    throw ParseError("unknown pooling '" + std::string(name) + "'");
}

std::string optimizer_name(Optimizer opt) {
    return opt == Optimizer::Adam ? "adam" : "sgd-momentum";
}

Optimizer optimizer_from_name(std::string_view name) {
    if (name == "adam") {
        return Optimizer::Adam;
    }
    if (name == "sgd-momentum") {
        return Optimizer::SgdMomentum;
    }
    throw ParseError("unknown optimizer '" + std::string(name) + "'");
}

// Sequential reader for the strict line-oriented format: keys arrive in the
// order save() wrote them.
class Fields {
public:
    explicit Fields(std::string_view text) : reader_(text) {}

    // "key value..." line; returns everything after the key.
    std::string_view expect(std::string_view key) {
        std::string_view line = next_line();
        if (line.substr(0, key.size()) != key ||
            (line.size() > key.size() && line[key.size()] != ' ')) {
            throw ParseError("expected '" + std::string(key) + "', got '" + std::string(line) +
                             "'");
        }
        std::size_t start = key.size();
        while (start < line.size() && line[start] == ' ') {
            ++start;
        }
        return line.substr(start);
    }

    std::string_view next_line() {
        std::string_view line;
        if (!reader_.next(line)) {
            throw ParseError("unexpected end of file");
        }
        // Trim a trailing '\r' so files survive CRLF round trips.
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        return line;
    }

    Matrix read_matrix(Eigen::Index rows, Eigen::Index cols) {
        Matrix m(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            const auto tokens = split_tokens(next_line());
            if (static_cast<Eigen::Index>(tokens.size()) != cols) {
                throw ParseError("matrix row has " + std::to_string(tokens.size()) +
                                 " values, expected " + std::to_string(cols));
            }
            for (Eigen::Index c = 0; c < cols; ++c) {
                m(r, c) = parse_double(tokens[static_cast<std::size_t>(c)]);
            }
        }
        return m;
    }

private:
    LineReader reader_;
};

int check_header(Fields& fields, const char* magic, int supported) {
    const auto tokens = split_tokens(fields.next_line());
    if (tokens.size() != 2 || tokens[0] != magic) {
        throw ParseError(std::string("not a ") + magic + " file");
    }
    const int version = static_cast<int>(parse_int(tokens[1]));
    if (version != supported) {
        throw VersionError(std::string(magic) + " version " + std::to_string(version) +
                           " unsupported (expected " + std::to_string(supported) + ")");
    }
    return version;
}

void append_widths(std::string& out, const char* key, const std::vector<Index>& widths) {
    out += key;
    out += ' ' + std::to_string(widths.size());
    for (Index w : widths) {
        out += ' ' + std::to_string(w);
    }
    out += '\n';
}

std::vector<Index> parse_widths(std::string_view value) {
    const auto tokens = split_tokens(value);
    if (tokens.empty()) {
        throw ParseError("missing width count");
    }
    const auto count = static_cast<std::size_t>(parse_int(tokens[0]));
    if (tokens.size() != count + 1) {
        throw ParseError("width list length mismatch");
    }
    std::vector<Index> widths;
    widths.reserve(count);
    for (std::size_t i = 1; i < tokens.size(); ++i) {
        widths.push_back(parse_int(tokens[i]));
    }
    return widths;
}

} // namespace

std::string save_part_graph(const FeaturizedGraph& graph) {
    std::string out;
    out += std::string(kGraphMagic) + ' ' + std::to_string(kPartGraphVersion) + '\n';
    out += "object_id " + graph.object_id + '\n';
    out += "label " + graph.label + '\n';
    out += "sampler.angle_threshold " + format_double(graph.sampler.angle_threshold) + '\n';
    out += "sampler.max_parts " + std::to_string(graph.sampler.max_parts) + '\n';
    out += "sampler.seed " + std::to_string(graph.sampler.seed) + '\n';
    out += "sampler.threshold_scale " + format_double(graph.sampler.threshold_scale) + '\n';
    out += "sampler.area_weighted_centers " +
           std::to_string(graph.sampler.area_weighted_centers ? 1 : 0) + '\n';
    out += "features.n_points " + std::to_string(graph.features.n_points) + '\n';
    out += "features.lrf_mode " + lrf_name(graph.features.lrf_mode) + '\n';
    out += "features.include_angle " + std::to_string(graph.features.include_angle ? 1 : 0) +
           '\n';
    out += "features.seed " + std::to_string(graph.features.seed) + '\n';
    out += "parts " + std::to_string(graph.parts.size()) + '\n';
    for (std::size_t p = 0; p < graph.parts.size(); ++p) {
        out += "part " + std::to_string(p) + ' ' + std::to_string(graph.parts[p].rows()) + ' ' +
               std::to_string(graph.parts[p].cols()) + '\n';
        append_matrix(out, graph.parts[p]);
    }
    out += "edges " + std::to_string(graph.edges.size()) + '\n';
    for (const auto& [a, b] : graph.edges) {
        out += std::to_string(a) + ' ' + std::to_string(b) + '\n';
    }
    out += "end\n";
    return out;
}

FeaturizedGraph load_part_graph(std::string_view text) {
    Fields fields(text);
    check_header(fields, kGraphMagic, kPartGraphVersion);

    FeaturizedGraph graph;
    graph.object_id = std::string(fields.expect("object_id"));
    graph.label = std::string(fields.expect("label"));
    graph.sampler.angle_threshold = parse_double(fields.expect("sampler.angle_threshold"));
    graph.sampler.max_parts = parse_int(fields.expect("sampler.max_parts"));
    graph.sampler.seed = parse_uint64(fields.expect("sampler.seed"));
    graph.sampler.threshold_scale = parse_double(fields.expect("sampler.threshold_scale"));
    graph.sampler.area_weighted_centers =
        parse_int(fields.expect("sampler.area_weighted_centers")) != 0;
    graph.features.n_points = parse_int(fields.expect("features.n_points"));
    graph.features.lrf_mode = lrf_from_name(fields.expect("features.lrf_mode"));
    graph.features.include_angle = parse_int(fields.expect("features.include_angle")) != 0;
    graph.features.seed = parse_uint64(fields.expect("features.seed"));

    const auto n_parts = static_cast<std::size_t>(parse_int(fields.expect("parts")));
    graph.parts.reserve(n_parts);
    for (std::size_t p = 0; p < n_parts; ++p) {
        const auto tokens = split_tokens(fields.expect("part"));
        if (tokens.size() != 3 || static_cast<std::size_t>(parse_int(tokens[0])) != p) {
            throw ParseError("bad part header for part " + std::to_string(p));
        }
        graph.parts.push_back(fields.read_matrix(parse_int(tokens[1]), parse_int(tokens[2])));
    }

    const auto n_edges = static_cast<std::size_t>(parse_int(fields.expect("edges")));
    graph.edges.reserve(n_edges);
    for (std::size_t e = 0; e < n_edges; ++e) {
        const auto tokens = split_tokens(fields.next_line());
        if (tokens.size() != 2) {
            throw ParseError("bad edge line");
        }
        graph.edges.emplace_back(parse_int(tokens[0]), parse_int(tokens[1]));
    }
    if (fields.next_line() != "end") {
        throw ParseError("missing end marker");
    }
    return graph;
}

Checkpoint checkpoint_from_model(nn::PartGnn& model, const TrainConfig& train_cfg) {
    Checkpoint ckpt;
    ckpt.model = model.config();
    ckpt.train = train_cfg;
    for (const auto& [name, param] : model.named_params()) {
        ckpt.params.emplace_back(name, param->value);
    }
    for (const auto& [name, state] : model.named_state()) {
        ckpt.state.emplace_back(name, *state);
    }
    return ckpt;
}

void load_into_model(const Checkpoint& ckpt, nn::PartGnn& model) {
    const auto params = model.named_params();
    if (params.size() != ckpt.params.size()) {
        throw ShapeMismatchError("checkpoint has " + std::to_string(ckpt.params.size()) +
                                 " parameter arrays, model expects " +
                                 std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& [name, value] = ckpt.params[i];
        if (name != params[i].first) {
            throw ShapeMismatchError("checkpoint parameter '" + name + "' where '" +
                                     params[i].first + "' expected");
        }
        if (value.rows() != params[i].second->value.rows() ||
            value.cols() != params[i].second->value.cols()) {
            throw ShapeMismatchError("checkpoint parameter '" + name + "' has shape " +
                                     std::to_string(value.rows()) + "x" +
                                     std::to_string(value.cols()) + ", model expects " +
                                     std::to_string(params[i].second->value.rows()) + "x" +
                                     std::to_string(params[i].second->value.cols()));
        }
        params[i].second->value = value;
    }
    const auto state = model.named_state();
    if (state.size() != ckpt.state.size()) {
        throw ShapeMismatchError("checkpoint state array count mismatch");
    }
    for (std::size_t i = 0; i < state.size(); ++i) {
        const auto& [name, value] = ckpt.state[i];
        if (name != state[i].first || value.rows() != state[i].second->rows() ||
            value.cols() != state[i].second->cols()) {
            throw ShapeMismatchError("checkpoint state '" + name + "' mismatch");
        }
        *state[i].second = value;
    }
}

std::string save_checkpoint(const Checkpoint& ckpt) {
    std::string out;
    out += std::string(kCheckpointMagic) + ' ' + std::to_string(ckpt.version) + '\n';
    out += "model.n_classes " + std::to_string(ckpt.model.n_classes) + '\n';
    out += "model.in_features " + std::to_string(ckpt.model.in_features) + '\n';
    out += "model.max_parts " + std::to_string(ckpt.model.max_parts) + '\n';
    out += "model.pooling " + pooling_name(ckpt.model.pooling) + '\n';
    append_widths(out, "model.encoder_widths", ckpt.model.encoder_widths);
    append_widths(out, "model.reduce_widths", ckpt.model.reduce_widths);
    out += "model.gat_heads " + std::to_string(ckpt.model.gat_heads) + '\n';
    append_widths(out, "model.gat_head_widths", ckpt.model.gat_head_widths);
    append_widths(out, "model.classifier_widths", ckpt.model.classifier_widths);
    out += "train.learning_rate " + format_double(ckpt.train.learning_rate) + '\n';
    out += "train.optimizer " + optimizer_name(ckpt.train.optimizer) + '\n';
    out += "train.batch_size " + std::to_string(ckpt.train.batch_size) + '\n';
    out += "train.epochs " + std::to_string(ckpt.train.epochs) + '\n';
    out += "train.disconnect_rate " + format_double(ckpt.train.disconnect_rate) + '\n';
    out += "train.seed " + std::to_string(ckpt.train.seed) + '\n';
    out += "train.lrf_mode " + lrf_name(ckpt.train.lrf_mode) + '\n';
    out += "train.include_angle " + std::to_string(ckpt.train.include_angle ? 1 : 0) + '\n';
    out += "train.pooling " + pooling_name(ckpt.train.pooling) + '\n';
    out += "train.threshold_scale_eval " + format_double(ckpt.train.threshold_scale_eval) +
           '\n';
    out += "train.early_stop_train_acc " + format_double(ckpt.train.early_stop_train_acc) +
           '\n';
    out += "train.early_stop_val_acc " + format_double(ckpt.train.early_stop_val_acc) + '\n';

    out += "params " + std::to_string(ckpt.params.size()) + '\n';
    for (const auto& [name, value] : ckpt.params) {
        out += "param " + name + ' ' + std::to_string(value.rows()) + ' ' +
               std::to_string(value.cols()) + '\n';
        append_matrix(out, value);
    }
    out += "state " + std::to_string(ckpt.state.size()) + '\n';
    for (const auto& [name, value] : ckpt.state) {
        out += "state_array " + name + ' ' + std::to_string(value.rows()) + ' ' +
               std::to_string(value.cols()) + '\n';
        append_matrix(out, value);
    }
    out += "end\n";
    return out;
}

Checkpoint load_checkpoint(std::string_view text) {
    Fields fields(text);
    Checkpoint ckpt;
    ckpt.version = check_header(fields, kCheckpointMagic, kCheckpointVersion);

    ckpt.model.n_classes = parse_int(fields.expect("model.n_classes"));
    ckpt.model.in_features = parse_int(fields.expect("model.in_features"));
    ckpt.model.max_parts = parse_int(fields.expect("model.max_parts"));
    ckpt.model.pooling = pooling_from_name(fields.expect("model.pooling"));
    ckpt.model.encoder_widths = parse_widths(fields.expect("model.encoder_widths"));
    ckpt.model.reduce_widths = parse_widths(fields.expect("model.reduce_widths"));
    ckpt.model.gat_heads = parse_int(fields.expect("model.gat_heads"));
    ckpt.model.gat_head_widths = parse_widths(fields.expect("model.gat_head_widths"));
    ckpt.model.classifier_widths = parse_widths(fields.expect("model.classifier_widths"));

    ckpt.train.learning_rate = parse_double(fields.expect("train.learning_rate"));
    ckpt.train.optimizer = optimizer_from_name(fields.expect("train.optimizer"));
    ckpt.train.batch_size = parse_int(fields.expect("train.batch_size"));
    ckpt.train.epochs = parse_int(fields.expect("train.epochs"));
    ckpt.train.disconnect_rate = parse_double(fields.expect("train.disconnect_rate"));
    ckpt.train.seed = parse_uint64(fields.expect("train.seed"));
    ckpt.train.lrf_mode = lrf_from_name(fields.expect("train.lrf_mode"));
    ckpt.train.include_angle = parse_int(fields.expect("train.include_angle")) != 0;
    ckpt.train.pooling = pooling_from_name(fields.expect("train.pooling"));
    ckpt.train.threshold_scale_eval = parse_double(fields.expect("train.threshold_scale_eval"));
    ckpt.train.early_stop_train_acc =
        parse_double(fields.expect("train.early_stop_train_acc"));
    ckpt.train.early_stop_val_acc = parse_double(fields.expect("train.early_stop_val_acc"));

    const auto n_params = static_cast<std::size_t>(parse_int(fields.expect("params")));
    ckpt.params.reserve(n_params);
    for (std::size_t i = 0; i < n_params; ++i) {
        const auto tokens = split_tokens(fields.expect("param"));
        if (tokens.size() != 3) {
            throw ParseError("bad param header");
        }
        ckpt.params.emplace_back(std::string(tokens[0]),
                                 fields.read_matrix(parse_int(tokens[1]), parse_int(tokens[2])));
    }
    const auto n_state = static_cast<std::size_t>(parse_int(fields.expect("state")));
    ckpt.state.reserve(n_state);
    for (std::size_t i = 0; i < n_state; ++i) {
        const auto tokens = split_tokens(fields.expect("state_array"));
        if (tokens.size() != 3) {
            throw ParseError("bad state header");
        }
        ckpt.state.emplace_back(std::string(tokens[0]),
                                fields.read_matrix(parse_int(tokens[1]), parse_int(tokens[2])));
    }
    if (fields.next_line() != "end") {
        throw ParseError("missing end marker");
    }
    return ckpt;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) {
    std::uint64_t h = basis;
    for (const char ch : bytes) {
        h ^= static_cast<unsigned char>(ch);
        h *= 1099511628211ull;
    }
    return h;
}

std::string cache_key(std::string_view mesh_bytes, const SamplerConfig& sampler,
                      const FeatureConfig& features, int smoothing_passes) {
    std::string cfg;
    cfg += format_double(sampler.angle_threshold) + ';';
    cfg += std::to_string(sampler.max_parts) + ';';
    cfg += std::to_string(sampler.seed) + ';';
    cfg += format_double(sampler.threshold_scale) + ';';
    cfg += std::to_string(sampler.area_weighted_centers ? 1 : 0) + ';';
    cfg += std::to_string(features.n_points) + ';';
    cfg += lrf_name(features.lrf_mode) + ';';
    cfg += std::to_string(features.include_angle ? 1 : 0) + ';';
    cfg += std::to_string(features.seed) + ';';
    cfg += std::to_string(smoothing_passes);

    const std::uint64_t h = fnv1a64(cfg, fnv1a64(mesh_bytes));
    static const char* hex = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 0; i < 16; ++i) {
        out[static_cast<std::size_t>(15 - i)] = hex[(h >> (4 * i)) & 0xf];
    }
    return out;
}

} // namespace partgraph
