#include "rgdet/binary_io.hpp"
#include "rgdet/error.hpp"
#include "rgdet/feature_agg.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace rgdet {

namespace {

struct Tensor {
    std::vector<std::uint32_t> dims;
    std::vector<double> values;
};

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void put_tensor(std::ostream& os, const std::string& name, std::vector<std::uint32_t> dims,
                const std::vector<double>& values) {
    binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(dims.size()));
    for (auto d : dims) binio::put(os, d);
    for (double v : values) binio::put(os, v);
}

void put_linear(std::ostream& os, const std::string& name, const LinearLayer& l, std::uint32_t& count) {
    put_tensor(os, name + ".weight",
               {static_cast<std::uint32_t>(l.out_dim()), static_cast<std::uint32_t>(l.in_dim())}, l.weight().data);
    ++count;
    if (l.has_bias()) {
        put_tensor(os, name + ".bias", {static_cast<std::uint32_t>(l.out_dim())}, l.bias());
        ++count;
    }
}

void put_norm(std::ostream& os, const std::string& name, const LayerNorm& n, std::uint32_t& count) {
    const auto c = static_cast<std::uint32_t>(n.gamma.size());
    put_tensor(os, name + ".gamma", {c}, n.gamma);
    put_tensor(os, name + ".beta", {c}, n.beta);
    put_tensor(os, name + ".eps", {}, {n.eps});
    count += 3;
}

const Tensor& need(const std::map<std::string, Tensor>& t, const std::string& name) {
    auto it = t.find(name);
    if (it == t.end()) throw data_error("FormatError", "weights file missing tensor '" + name + "'");
    return it->second;
}

LinearLayer get_linear(const std::map<std::string, Tensor>& t, const std::string& name) {
    const Tensor& w = need(t, name + ".weight");
    if (w.dims.size() != 2) throw data_error("ShapeMismatch", name + ".weight must be rank 2");
    Matrix m(w.dims[0], w.dims[1]);
    m.data = w.values;
    auto it = t.find(name + ".bias");
    if (it == t.end()) return LinearLayer(std::move(m), {}, false);
    if (it->second.dims.size() != 1) throw data_error("ShapeMismatch", name + ".bias must be rank 1");
    return LinearLayer(std::move(m), it->second.values, true);
}

LayerNorm get_norm(const std::map<std::string, Tensor>& t, const std::string& name) {
    LayerNorm n;
    n.gamma = need(t, name + ".gamma").values;
    n.beta = need(t, name + ".beta").values;
    n.eps = need(t, name + ".eps").values.at(0);
    return n;
}

} // namespace

void save_weights(const PgeParams& p, const std::filesystem::path& path) {
    p.validate();
    std::ostringstream body(std::ios::binary);
    std::uint32_t count = 0;
    put_linear(body, "lfa", p.lfa, count);
    put_linear(body, "gfa.input", p.gfa.input, count);
    put_norm(body, "gfa.ln1", p.gfa.ln1, count);
    put_linear(body, "gfa.qkv", p.gfa.qkv, count);
    put_linear(body, "gfa.out", p.gfa.out, count);
    put_norm(body, "gfa.ln2", p.gfa.ln2, count);
    put_linear(body, "gfa.ffn_in", p.gfa.ffn_in, count);
    put_linear(body, "gfa.ffn_out", p.gfa.ffn_out, count);
    put_tensor(body, "gfa.heads", {}, {static_cast<double>(p.gfa.heads)});
    ++count;
    put_linear(body, "head", p.head, count);

    std::ostringstream all(std::ios::binary);
    binio::put_magic(all, "RGWT");
    binio::put<std::uint32_t>(all, 1);
    binio::put<std::uint32_t>(all, count);
    all << body.str();
    std::string bytes = all.str();
    std::ostringstream footer(std::ios::binary);
    binio::put<std::uint64_t>(footer, fnv1a(bytes));
    bytes += footer.str();

    std::ofstream os(path, std::ios::binary);
    if (!os || !os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()))) {
        throw data_error("IoError", "cannot write " + path.string());
    }
}

PgeParams load_weights(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw data_error("IoError", "cannot open " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
    if (bytes.size() < 20) throw data_error("FormatError", "weights file truncated");

    std::istringstream tail(bytes.substr(bytes.size() - 8), std::ios::binary);
    const auto digest = binio::get<std::uint64_t>(tail);
    const std::string_view payload(bytes.data(), bytes.size() - 8);
    if (digest != fnv1a(payload)) throw data_error("FormatError", "weights digest mismatch (file corrupted)");

    std::istringstream is(std::string(payload), std::ios::binary);
    if (!binio::has_magic(is, "RGWT")) throw data_error("FormatError", "bad magic, expected RGWT");
    const auto version = binio::get<std::uint32_t>(is);
    if (version != 1) throw data_error("FormatError", "unsupported RGWT version " + std::to_string(version));
    const auto count = binio::get<std::uint32_t>(is);

    std::map<std::string, Tensor> tensors;
    for (std::uint32_t t = 0; t < count; ++t) {
        const auto name_len = binio::get<std::uint32_t>(is);
        if (name_len > 4096) throw data_error("FormatError", "tensor name too long");
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len)) throw data_error("FormatError", "truncated tensor name");
        Tensor tensor;
        const auto rank = binio::get<std::uint32_t>(is);
        if (rank > 8) throw data_error("FormatError", "tensor rank too large");
        std::size_t numel = 1;
        for (std::uint32_t r = 0; r < rank; ++r) {
            tensor.dims.push_back(binio::get<std::uint32_t>(is));
            numel *= tensor.dims.back();
        }
        if (numel * 8 > payload.size()) throw data_error("FormatError", "tensor '" + name + "' larger than file");
        tensor.values.resize(numel);
        for (auto& v : tensor.values) v = binio::get<double>(is);
        tensors.emplace(std::move(name), std::move(tensor));
    }
    if (is.peek() != std::char_traits<char>::eof()) throw data_error("FormatError", "trailing bytes in weights file");

    PgeParams p;
    p.lfa = get_linear(tensors, "lfa");
    p.gfa.input = get_linear(tensors, "gfa.input");
    p.gfa.ln1 = get_norm(tensors, "gfa.ln1");
    p.gfa.qkv = get_linear(tensors, "gfa.qkv");
    p.gfa.out = get_linear(tensors, "gfa.out");
    p.gfa.ln2 = get_norm(tensors, "gfa.ln2");
    p.gfa.ffn_in = get_linear(tensors, "gfa.ffn_in");
    p.gfa.ffn_out = get_linear(tensors, "gfa.ffn_out");
    p.gfa.heads = static_cast<std::size_t>(need(tensors, "gfa.heads").values.at(0));
    p.head = get_linear(tensors, "head");
    p.validate();
    return p;
}

} // namespace rgdet
