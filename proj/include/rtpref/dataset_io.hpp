#pragma once

// QueryDataset on disk: a CSV of per-query statistics plus a JSON sidecar
// mapping query_id to its feature vector.
//
//   query_id,n,sum_choice,sum_decision_time,sum_response_time,n_pos
//   {"format_version": 1, "dimension": d, "queries": {"<query_id>": [x...]}}
//
// Reals are written with 17 significant digits and round-trip exactly.

#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rtpref/estimation.hpp"

namespace rtpref {

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr const char* kDatasetCsvHeader =
    "query_id,n,sum_choice,sum_decision_time,sum_response_time,n_pos";

inline void write_dataset_csv(const QueryDataset& data, std::ostream& out) {
    out << kDatasetCsvHeader << '\n';
    for (const auto& e : data.entries()) {
        out << e.query_id << ',' << e.n << ',' << e.sum_choice << ','
            << format_real(e.sum_decision_time) << ',' << format_real(e.sum_response_time)
            << ',' << e.n_pos << '\n';
    }
}

inline nlohmann::json dataset_sidecar(const QueryDataset& data) {
    nlohmann::json queries = nlohmann::json::object();
    for (const auto& e : data.entries()) {
        queries[std::to_string(e.query_id)] = std::vector<double>(e.x.begin(), e.x.end());
    }
    return {{"format_version", kDatasetFormatVersion},
            {"dimension", data.dimension()},
            {"queries", std::move(queries)}};
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        fields.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
        fields.emplace_back();
    }
    return fields;
}

template <typename T>
T parse_field(const std::string& text, const std::string& where) {
    std::size_t used = 0;
    T value{};
    try {
        if constexpr (std::is_same_v<T, double>) {
            value = std::stod(text, &used);
        } else if constexpr (std::is_same_v<T, std::size_t>) {
            if (!text.empty() && text.front() == '-') {
                throw ParseError(where + ": expected a non-negative integer, got '" + text + "'");
            }
            value = static_cast<std::size_t>(std::stoull(text, &used));
        } else {
            value = static_cast<T>(std::stoll(text, &used));
        }
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception&) {
        throw ParseError(where + ": cannot parse '" + text + "'");
    }
    if (used != text.size()) {
        throw ParseError(where + ": trailing characters in '" + text + "'");
    }
    return value;
}

}  // namespace detail

/// Parses the CSV, resolving feature vectors through the sidecar object.
inline QueryDataset read_dataset(std::istream& csv, const nlohmann::json& sidecar) {
    if (!sidecar.is_object() || !sidecar.contains("queries") || !sidecar["queries"].is_object()) {
        throw ParseError("dataset sidecar: missing 'queries' object");
    }
    if (sidecar.value("format_version", 0) != kDatasetFormatVersion) {
        throw ParseError("dataset sidecar: unsupported format_version");
    }
    const auto& queries = sidecar["queries"];
    std::string line;
    if (!std::getline(csv, line)) {
        throw ParseError("dataset csv line 1: missing header");
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    if (line != kDatasetCsvHeader) {
        throw ParseError("dataset csv line 1: unexpected header '" + line + "'");
    }
    QueryDataset data;
    int line_no = 1;
    while (std::getline(csv, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto fields = detail::split_csv_line(line);
        const std::string where = "dataset csv line " + std::to_string(line_no);
        if (fields.size() != 6) {
            throw ParseError(where + ": expected 6 fields, got " + std::to_string(fields.size()));
        }
        QueryStats s;
        s.query_id = detail::parse_field<std::size_t>(fields[0], where + " field query_id");
        s.n = detail::parse_field<std::int64_t>(fields[1], where + " field n");
        s.sum_choice = detail::parse_field<std::int64_t>(fields[2], where + " field sum_choice");
        s.sum_decision_time =
            detail::parse_field<double>(fields[3], where + " field sum_decision_time");
        s.sum_response_time =
            detail::parse_field<double>(fields[4], where + " field sum_response_time");
        s.n_pos = detail::parse_field<std::int64_t>(fields[5], where + " field n_pos");
        const std::string key = std::to_string(s.query_id);
        if (!queries.contains(key)) {
            throw ParseError(where + ": query_id " + key + " has no feature vector in sidecar");
        }
        try {
            const auto x = queries[key].get<std::vector<double>>();
            s.x = Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
        } catch (const nlohmann::json::exception& ex) {
            throw ParseError("dataset sidecar query " + key + ": " + ex.what());
        }
        try {
            data.add_stats(std::move(s));
        } catch (const InvalidArgument& ex) {
            throw ParseError(where + ": " + ex.what());
        }
    }
    return data;
}

inline void save_dataset(const QueryDataset& data, const std::string& csv_path,
                         const std::string& json_path) {
    std::ofstream csv(csv_path);
    if (!csv) {
        throw Error("cannot open " + csv_path + " for writing");
    }
    write_dataset_csv(data, csv);
    std::ofstream js(json_path);
    if (!js) {
        throw Error("cannot open " + json_path + " for writing");
    }
    js << dataset_sidecar(data).dump(2) << '\n';
}

inline QueryDataset load_dataset(const std::string& csv_path, const std::string& json_path) {
    std::ifstream js(json_path);
    if (!js) {
        throw ParseError("cannot open " + json_path);
    }
    nlohmann::json sidecar;
    try {
        sidecar = nlohmann::json::parse(js);
    } catch (const nlohmann::json::parse_error& ex) {
        throw ParseError(json_path + ": " + ex.what());
    }
    std::ifstream csv(csv_path);
    if (!csv) {
        throw ParseError("cannot open " + csv_path);
    }
    return read_dataset(csv, sidecar);
}

}  // namespace rtpref
