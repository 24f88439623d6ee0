#include "remp/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace remp {

namespace {

std::string meta_path_for(const std::string& csv_path) {
    if (csv_path.size() > 4 && csv_path.ends_with(".csv"))
        return csv_path.substr(0, csv_path.size() - 4) + ".meta";
    return csv_path + ".meta";
}

std::vector<std::string> split_fields(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, delim)) out.push_back(field);
    if (!line.empty() && line.back() == delim) out.push_back("");
    return out;
}

}  // namespace

std::string split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    throw std::logic_error("split_name: bad split");
}

Split parse_split(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    if (name == "test") return Split::Test;
    throw std::invalid_argument("unknown split '" + name + "'");
}

std::size_t Dataset::n_train_classes() const {
    return class_indices(Split::Train).size();
}

std::vector<std::size_t> Dataset::class_indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < classes.size(); ++i)
        if (classes[i].split == s) out.push_back(i);
    return out;
}

void Dataset::validate() const {
    std::map<int, Split> seen;
    for (const auto& c : classes) {
        auto [it, inserted] = seen.emplace(c.class_id, c.split);
        if (!inserted)
            throw std::runtime_error("dataset '" + name + "': class_id " +
                                     std::to_string(c.class_id) + " appears in more than one split");
        if (c.features.cols() != dim)
            throw std::runtime_error("dataset '" + name + "': class " + std::to_string(c.class_id) +
                                     " has feature width " + std::to_string(c.features.cols()) +
                                     ", expected " + std::to_string(dim));
        if (!c.features.all_finite())
            throw std::runtime_error("dataset '" + name + "': class " + std::to_string(c.class_id) +
                                     " contains non-finite features");
    }
}

Dataset load_dataset(const std::string& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw std::runtime_error("cannot open dataset file '" + csv_path + "'");

    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw std::runtime_error(csv_path + ": empty file");
    ++lineno;
    auto header = split_fields(line, ',');
    if (header.size() < 3 || header[0] != "class_id" || header[1] != "split")
        throw std::runtime_error(csv_path + ":1: bad header, expected 'class_id,split,f0,...'");
    const std::size_t dim = header.size() - 2;

    // class_id -> (split, rows); preserves first-seen order.
    std::vector<int> order;
    std::map<int, std::pair<Split, std::vector<std::vector<double>>>> by_class;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto fields = split_fields(line, ',');
        if (fields.size() != dim + 2)
            throw std::runtime_error(csv_path + ":" + std::to_string(lineno) + ": expected " +
                                     std::to_string(dim + 2) + " fields, got " +
                                     std::to_string(fields.size()));
        int class_id;
        Split sp;
        std::vector<double> row(dim);
        try {
            class_id = std::stoi(fields[0]);
            sp = parse_split(fields[1]);
            for (std::size_t j = 0; j < dim; ++j) row[j] = std::stod(fields[2 + j]);
        } catch (const std::exception& e) {
            throw std::runtime_error(csv_path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        auto it = by_class.find(class_id);
        if (it == by_class.end()) {
            order.push_back(class_id);
            it = by_class.emplace(class_id, std::make_pair(sp, std::vector<std::vector<double>>{})).first;
        } else if (it->second.first != sp) {
            throw std::runtime_error(csv_path + ":" + std::to_string(lineno) + ": class " +
                                     std::to_string(class_id) + " assigned to two different splits");
        }
        it->second.second.push_back(std::move(row));
    }

    Dataset ds;
    ds.dim = dim;
    for (int id : order) {
        auto& [sp, rows] = by_class[id];
        ClassData c;
        c.class_id = id;
        c.split = sp;
        c.features = Matrix(rows.size(), dim);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < dim; ++j) c.features(i, j) = rows[i][j];
        ds.classes.push_back(std::move(c));
    }

    // Cross-validate against the sidecar manifest.
    const std::string mpath = meta_path_for(csv_path);
    std::ifstream meta(mpath);
    if (!meta) throw std::runtime_error("cannot open manifest '" + mpath + "'");
    std::map<std::string, std::string> kv;
    while (std::getline(meta, line)) {
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw std::runtime_error(mpath + ": malformed line '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    for (const char* key : {"name", "dim", "n_train_classes"})
        if (!kv.count(key)) throw std::runtime_error(mpath + ": missing key '" + std::string(key) + "'");
    ds.name = kv["name"];
    if (std::stoul(kv["dim"]) != dim)
        throw std::runtime_error(mpath + ": dim=" + kv["dim"] + " but CSV has " + std::to_string(dim));
    if (std::stoul(kv["n_train_classes"]) != ds.n_train_classes())
        throw std::runtime_error(mpath + ": n_train_classes=" + kv["n_train_classes"] + " but CSV has " +
                                 std::to_string(ds.n_train_classes()));

    ds.validate();
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& csv_path) {
    std::ofstream out(csv_path, std::ios::binary);  // binary keeps LF on every platform
    if (!out) throw std::runtime_error("cannot write dataset file '" + csv_path + "'");
    out << "class_id,split";
    for (std::size_t j = 0; j < ds.dim; ++j) out << ",f" << j;
    out << "\n";
    out.precision(17);
    for (const auto& c : ds.classes)
        for (std::size_t i = 0; i < c.features.rows(); ++i) {
            out << c.class_id << ',' << split_name(c.split);
            for (std::size_t j = 0; j < ds.dim; ++j) out << ',' << c.features(i, j);
            out << "\n";
        }
    std::ofstream meta(meta_path_for(csv_path), std::ios::binary);
    if (!meta) throw std::runtime_error("cannot write manifest for '" + csv_path + "'");
    meta << "name=" << ds.name << "\n"
         << "dim=" << ds.dim << "\n"
         << "n_train_classes=" << ds.n_train_classes() << "\n";
}

Dataset gen_synthetic(std::size_t n_classes, std::size_t per_class, std::size_t dim,
                      double spread, double separation, Rng& rng,
                      std::array<double, 3> split_fractions) {
    if (n_classes < 3) throw std::invalid_argument("gen_synthetic: need at least 3 classes");
    const double fsum = split_fractions[0] + split_fractions[1] + split_fractions[2];
    if (std::abs(fsum - 1.0) > 1e-9)
        throw std::invalid_argument("gen_synthetic: split fractions must sum to 1");
    const std::size_t n_train = std::max<std::size_t>(1, std::llround(split_fractions[0] * n_classes));
    const std::size_t n_val = std::max<std::size_t>(1, std::llround(split_fractions[1] * n_classes));
    if (n_train + n_val + 1 > n_classes)
        throw std::invalid_argument("gen_synthetic: split fractions leave no test classes");
    const std::size_t n_test = n_classes - n_train - n_val;
    (void)n_test;

    std::vector<std::size_t> class_order(n_classes);
    std::iota(class_order.begin(), class_order.end(), 0);
    rng.shuffle(class_order);

    std::vector<Split> split_of(n_classes);
    for (std::size_t r = 0; r < n_classes; ++r) {
        Split s = r < n_train ? Split::Train : (r < n_train + n_val ? Split::Val : Split::Test);
        split_of[class_order[r]] = s;
    }

    Dataset ds;
    ds.name = "synthetic";
    ds.dim = dim;
    for (std::size_t c = 0; c < n_classes; ++c) {
        std::vector<double> mean(dim);
        for (std::size_t j = 0; j < dim; ++j) mean[j] = rng.uniform(-separation, separation);
        ClassData cd;
        cd.class_id = static_cast<int>(c);
        cd.split = split_of[c];
        cd.features = Matrix(per_class, dim);
        for (std::size_t i = 0; i < per_class; ++i)
            for (std::size_t j = 0; j < dim; ++j)
                cd.features(i, j) = mean[j] + spread * rng.normal();
        ds.classes.push_back(std::move(cd));
    }
    ds.validate();
    return ds;
}

Episode sample_episode(const Dataset& ds, Split split, std::size_t n_way,
                       std::size_t k_shot, std::size_t m_query, Rng& rng) {
    if (n_way == 0 || k_shot == 0)
        throw std::invalid_argument("sample_episode: need n_way >= 1 and k_shot >= 1");
    auto pool = ds.class_indices(split);
    if (pool.size() < n_way)
        throw std::invalid_argument("sample_episode: split '" + split_name(split) + "' has " +
                                 std::to_string(pool.size()) + " classes, need " + std::to_string(n_way));

    // Global label = position of the class within its split's class list.
    std::vector<std::size_t> positions(pool.size());
    std::iota(positions.begin(), positions.end(), 0);
    rng.shuffle(positions);

    Episode ep;
    ep.n_way = n_way;
    ep.k_shot = k_shot;
    ep.m_query = m_query;
    ep.support = Matrix(n_way * k_shot, ds.dim);
    ep.query = Matrix(n_way * m_query, ds.dim);

    for (std::size_t n = 0; n < n_way; ++n) {
        const std::size_t pos = positions[n];
        const ClassData& cls = ds.classes[pool[pos]];
        const std::size_t avail = cls.features.rows();
        if (avail < k_shot + m_query)
            throw std::invalid_argument("sample_episode: class " + std::to_string(cls.class_id) + " has " +
                                     std::to_string(avail) + " samples, need " +
                                     std::to_string(k_shot + m_query));
        std::vector<std::size_t> rows(avail);
        std::iota(rows.begin(), rows.end(), 0);
        rng.shuffle(rows);
        const int global = static_cast<int>(pos);
        ep.class_map.push_back(global);
        for (std::size_t k = 0; k < k_shot; ++k) {
            const std::size_t dst = n * k_shot + k;
            for (std::size_t j = 0; j < ds.dim; ++j) ep.support(dst, j) = cls.features(rows[k], j);
            ep.support_local.push_back(static_cast<int>(n));
            ep.support_global.push_back(global);
        }
        for (std::size_t m = 0; m < m_query; ++m) {
            const std::size_t dst = n * m_query + m;
            for (std::size_t j = 0; j < ds.dim; ++j)
                ep.query(dst, j) = cls.features(rows[k_shot + m], j);
            ep.query_local.push_back(static_cast<int>(n));
            ep.query_global.push_back(global);
        }
    }
    return ep;
}

}  // namespace remp
