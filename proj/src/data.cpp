#include "sawar/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "sawar/errors.hpp"

namespace sawar {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else {
            field += c;
        }
    }
    out.push_back(std::move(field));
    return out;
}

bool is_missing(const std::string& s) { return s.empty() || s == "NA" || s == "nan" || s == "NaN"; }

double parse_number(const std::string& s, std::size_t line, const std::string& column) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (!s.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
        throw InputError("line " + std::to_string(line) + ": column '" + column + "' is not a number: '" + s + "'");
    }
    return v;
}

bool starts_with(const std::string& s, const char* prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

RawDataset parse_csv(const std::string& text, const std::string& name) {
    RawDataset raw;
    raw.name = name;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw FormatError(name + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const auto header = split_line(line);

    int time_col = -1, event_col = -1, id_col = -1;
    std::vector<int> num_cols, fac_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const auto& h = header[c];
        const int ci = static_cast<int>(c);
        if (h == "time") {
            time_col = ci;
        } else if (h == "event") {
            event_col = ci;
        } else if (h == "pid" || h == "id") {
            id_col = ci;
        } else if (starts_with(h, "num_")) {
            num_cols.push_back(ci);
            raw.num_names.push_back(h);
        } else if (starts_with(h, "fac_")) {
            fac_cols.push_back(ci);
            raw.fac_names.push_back(h);
        } else {
            raw.warnings.push_back(name + ": ignoring column '" + h + "'");
        }
    }
    if (time_col < 0) throw FormatError(name + ": missing 'time' column");
    if (event_col < 0) throw FormatError(name + ": missing 'event' column");

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_line(line);
        if (fields.size() != header.size()) {
            throw InputError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                             " fields, found " + std::to_string(fields.size()));
        }
        RawRow row;
        row.id = id_col >= 0 ? fields[static_cast<std::size_t>(id_col)] : std::to_string(raw.rows.size());
        const auto& tf = fields[static_cast<std::size_t>(time_col)];
        const auto& ef = fields[static_cast<std::size_t>(event_col)];
        if (is_missing(tf) || is_missing(ef)) {
            throw InputError("line " + std::to_string(line_no) + ": missing time or event");
        }
        row.time = parse_number(tf, line_no, "time");
        const double ev = parse_number(ef, line_no, "event");
        if (ev != 0.0 && ev != 1.0) {
            throw InputError("line " + std::to_string(line_no) + ": event must be 0 or 1, found '" + ef + "'");
        }
        row.event = static_cast<int>(ev);
        for (std::size_t k = 0; k < num_cols.size(); ++k) {
            const auto& f = fields[static_cast<std::size_t>(num_cols[k])];
            if (is_missing(f)) {
                row.num.emplace_back(std::nullopt);
                ++raw.missing_values;
            } else {
                row.num.emplace_back(parse_number(f, line_no, raw.num_names[k]));
            }
        }
        for (int c : fac_cols) {
            const auto& f = fields[static_cast<std::size_t>(c)];
            if (is_missing(f)) {
                row.fac.emplace_back(std::nullopt);
                ++raw.missing_values;
            } else {
                row.fac.emplace_back(f);
            }
        }
        if (!(row.time > 0.0)) {
            ++raw.dropped_nonpositive_time;
            continue;
        }
        raw.rows.push_back(std::move(row));
    }
    if (raw.dropped_nonpositive_time > 0) {
        raw.warnings.push_back(name + ": dropped " + std::to_string(raw.dropped_nonpositive_time) +
                               " rows with time <= 0");
    }
    return raw;
}

RawDataset load_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str(), std::filesystem::path(path).stem().string());
}

int FeatureCodec::dim() const {
    std::size_t d = numeric.size();
    for (const auto& f : factors) d += f.levels.size();
    return static_cast<int>(d);
}

std::vector<std::string> FeatureCodec::column_names() const {
    std::vector<std::string> out;
    for (const auto& n : numeric) out.push_back(n.name);
    for (const auto& f : factors) {
        for (const auto& l : f.levels) out.push_back(f.name + "=" + l);
    }
    return out;
}

namespace {

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Population mean and standard deviation.
std::pair<double, double> moments(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size()))};
}

const std::string& level_of(const RawRow& row, std::size_t k) {
    return row.fac[k] ? *row.fac[k] : kMissingLevel;
}

}  // namespace

FeatureCodec fit_codec(const RawDataset& raw, const std::vector<std::size_t>& train_rows, const CodecOptions& opts) {
    if (train_rows.empty()) throw CodecError("cannot fit a codec on zero rows");
    FeatureCodec codec;
    codec.source_numeric = raw.num_names;
    codec.source_factors = raw.fac_names;
    codec.normalize_all = opts.normalize_all;
    const double n = static_cast<double>(train_rows.size());

    for (std::size_t k = 0; k < raw.num_names.size(); ++k) {
        std::vector<double> observed;
        for (auto r : train_rows) {
            if (raw.rows.at(r).num[k]) observed.push_back(*raw.rows[r].num[k]);
        }
        if (observed.empty()) {
            codec.dropped.push_back(raw.num_names[k]);
            continue;
        }
        NumericColumn col;
        col.name = raw.num_names[k];
        col.median = median_of(observed);
        std::vector<double> imputed;
        for (auto r : train_rows) imputed.push_back(raw.rows[r].num[k].value_or(col.median));
        std::tie(col.mean, col.stddev) = moments(imputed);
        if (!(col.stddev > 0.0)) {
            codec.dropped.push_back(col.name);
            continue;
        }
        codec.numeric.push_back(col);
    }

    for (std::size_t k = 0; k < raw.fac_names.size(); ++k) {
        std::map<std::string, std::size_t> counts;
        for (auto r : train_rows) ++counts[level_of(raw.rows.at(r), k)];
        FactorColumn col;
        col.name = raw.fac_names[k];
        for (const auto& [level, count] : counts) {
            if (opts.normalize_all) {
                if (count == train_rows.size()) {
                    codec.dropped.push_back(col.name + "=" + level);
                    continue;
                }
                const double p = static_cast<double>(count) / n;
                col.mean.push_back(p);
                col.stddev.push_back(std::sqrt(p * (1.0 - p)));
            }
            col.levels.push_back(level);
        }
        if (!col.levels.empty()) codec.factors.push_back(std::move(col));
    }
    if (codec.dim() == 0) throw CodecError(raw.name + ": every covariate is constant on the train rows");
    return codec;
}

SurvivalDataset apply_codec(const FeatureCodec& codec, const RawDataset& raw, const std::vector<std::size_t>& rows) {
    if (raw.num_names != codec.source_numeric || raw.fac_names != codec.source_factors) {
        throw CodecError(raw.name + ": covariate columns do not match the fitted codec");
    }
    std::vector<std::size_t> num_pos, fac_pos;
    for (const auto& c : codec.numeric) {
        num_pos.push_back(static_cast<std::size_t>(
            std::find(raw.num_names.begin(), raw.num_names.end(), c.name) - raw.num_names.begin()));
    }
    for (const auto& f : codec.factors) {
        fac_pos.push_back(static_cast<std::size_t>(
            std::find(raw.fac_names.begin(), raw.fac_names.end(), f.name) - raw.fac_names.begin()));
    }

    SurvivalDataset ds;
    const auto n = static_cast<Eigen::Index>(rows.size());
    ds.X = RowMatrix::Zero(n, codec.dim());
    ds.t.resize(n);
    ds.rows = rows;
    for (Eigen::Index i = 0; i < n; ++i) {
        const RawRow& row = raw.rows.at(rows[static_cast<std::size_t>(i)]);
        ds.t(i) = row.time;
        ds.e.push_back(row.event);
        Eigen::Index c = 0;
        for (std::size_t k = 0; k < codec.numeric.size(); ++k, ++c) {
            const auto& col = codec.numeric[k];
            ds.X(i, c) = (row.num[num_pos[k]].value_or(col.median) - col.mean) / col.stddev;
        }
        for (std::size_t k = 0; k < codec.factors.size(); ++k) {
            const auto& col = codec.factors[k];
            const std::string& level = level_of(row, fac_pos[k]);
            for (std::size_t l = 0; l < col.levels.size(); ++l, ++c) {
                const double hot = col.levels[l] == level ? 1.0 : 0.0;
                ds.X(i, c) = codec.normalize_all ? (hot - col.mean[l]) / col.stddev[l] : hot;
            }
        }
    }
    return ds;
}

SurvivalDataset apply_codec(const FeatureCodec& codec, const RawDataset& raw) {
    std::vector<std::size_t> all(raw.rows.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return apply_codec(codec, raw, all);
}

SplitIndices split_indices(const std::vector<int>& events, std::uint64_t seed) {
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < events.size(); ++i) by_class[events[i] == 1 ? 1 : 0].push_back(i);

    SplitIndices out;
    std::mt19937_64 rng(seed);
    auto deal = [&](std::vector<std::size_t> idx) {
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto n = static_cast<double>(idx.size());
        const auto n_train = static_cast<std::size_t>(std::llround(0.6 * n));
        const auto n_val = std::min(idx.size() - n_train, static_cast<std::size_t>(std::llround(0.2 * n)));
        out.train.insert(out.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
        out.validation.insert(out.validation.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                              idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
        out.test.insert(out.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
    };
    if (by_class[0].empty() || by_class[1].empty()) {
        out.stratified = false;
        std::vector<std::size_t> all(events.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        deal(std::move(all));
    } else {
        deal(std::move(by_class[0]));
        deal(std::move(by_class[1]));
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.validation.begin(), out.validation.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

SplitDataset stratified_split(const RawDataset& raw, std::uint64_t seed, const CodecOptions& opts) {
    if (raw.rows.size() < 10) {
        throw InputError(raw.name + ": need at least 10 rows to split, found " + std::to_string(raw.rows.size()));
    }
    std::vector<int> events;
    for (const auto& r : raw.rows) events.push_back(r.event);
    const SplitIndices idx = split_indices(events, seed);

    SplitDataset split;
    split.seed = seed;
    split.stratified = idx.stratified;
    if (!idx.stratified) {
        split.warnings.push_back(raw.name + ": only one event class present, split is not stratified");
    }
    split.codec = fit_codec(raw, idx.train, opts);
    for (const auto& d : split.codec.dropped) {
        split.warnings.push_back(raw.name + ": dropped constant column '" + d + "'");
    }
    split.train = apply_codec(split.codec, raw, idx.train);
    split.validation = apply_codec(split.codec, raw, idx.validation);
    split.test = apply_codec(split.codec, raw, idx.test);
    return split;
}

nlohmann::json codec_to_json(const FeatureCodec& codec) {
    nlohmann::json j;
    j["source_numeric"] = codec.source_numeric;
    j["source_factors"] = codec.source_factors;
    j["normalize_all"] = codec.normalize_all;
    j["dropped"] = codec.dropped;
    j["numeric"] = nlohmann::json::array();
    for (const auto& c : codec.numeric) {
        j["numeric"].push_back({{"name", c.name}, {"median", c.median}, {"mean", c.mean}, {"stddev", c.stddev}});
    }
    j["factors"] = nlohmann::json::array();
    for (const auto& f : codec.factors) {
        j["factors"].push_back({{"name", f.name}, {"levels", f.levels}, {"mean", f.mean}, {"stddev", f.stddev}});
    }
    return j;
}

FeatureCodec codec_from_json(const nlohmann::json& j) {
    try {
        FeatureCodec codec;
        codec.source_numeric = j.at("source_numeric").get<std::vector<std::string>>();
        codec.source_factors = j.at("source_factors").get<std::vector<std::string>>();
        codec.normalize_all = j.at("normalize_all").get<bool>();
        codec.dropped = j.at("dropped").get<std::vector<std::string>>();
        for (const auto& c : j.at("numeric")) {
            codec.numeric.push_back({c.at("name").get<std::string>(), c.at("median").get<double>(),
                                     c.at("mean").get<double>(), c.at("stddev").get<double>()});
            if (!(codec.numeric.back().stddev > 0.0)) throw CodecError("codec standard deviation must be > 0");
        }
        for (const auto& f : j.at("factors")) {
            FactorColumn col;
            col.name = f.at("name").get<std::string>();
            col.levels = f.at("levels").get<std::vector<std::string>>();
            col.mean = f.at("mean").get<std::vector<double>>();
            col.stddev = f.at("stddev").get<std::vector<double>>();
            if (codec.normalize_all && (col.mean.size() != col.levels.size() || col.stddev.size() != col.levels.size())) {
                throw CodecError("codec factor '" + col.name + "' has inconsistent level statistics");
            }
            codec.factors.push_back(std::move(col));
        }
        return codec;
    } catch (const nlohmann::json::exception& ex) {
        throw CodecError(std::string("malformed codec: ") + ex.what());
    }
}

}  // namespace sawar
