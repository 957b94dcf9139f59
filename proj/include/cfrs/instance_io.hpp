#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "cfrs/errors.hpp"
#include "cfrs/instance.hpp"

namespace cfrs {

using nlohmann::json;

inline json instance_to_json(const Instance& inst) {
    json coords = json::array();
    for (const auto& p : inst.coords) coords.push_back({p.x, p.y});
    json out = {{"coords", std::move(coords)}, {"demands", inst.demands}, {"capacity", inst.capacity}};
    if (inst.support_ids)
        out["support_ids"] = *inst.support_ids;
    else
        out["support_ids"] = nullptr;
    return out;
}

inline Instance instance_from_json(const json& j) {
    Instance inst;
    try {
        for (const auto& row : j.at("coords")) {
            if (!row.is_array() || row.size() != 2) throw ParseError("coords rows must be [x, y] pairs");
            inst.coords.push_back({row[0].get<double>(), row[1].get<double>()});
        }
        inst.demands = j.at("demands").get<std::vector<int>>();
        inst.capacity = j.at("capacity").get<int>();
        if (j.contains("support_ids") && !j.at("support_ids").is_null())
            inst.support_ids = j.at("support_ids").get<std::vector<int>>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("instance JSON: ") + e.what());
    }
    inst.validate();
    return inst;
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Splits "KEY : VALUE" / "KEY: VALUE" / "KEY VALUE" header lines.
inline bool split_header(const std::string& line, std::string& key, std::string& value) {
    const auto colon = line.find(':');
    if (colon != std::string::npos) {
        key = trim(line.substr(0, colon));
        value = trim(line.substr(colon + 1));
        return !key.empty();
    }
    std::istringstream ss(line);
    if (!(ss >> key)) return false;
    std::getline(ss, value);
    value = trim(value);
    return true;
}

}  // namespace detail

// Minimal VRPLIB/TSPLIB subset: EUC_2D coordinates, integer demands, one
// depot. Coordinates are taken as-is (no rescaling) and later distance
// evaluation is plain Euclidean with no rounding. Anything outside the
// subset (EXPLICIT matrices, time windows, multiple depots) is rejected
// with the offending line number.
inline Instance read_vrplib(std::istream& in) {
    std::string line;
    int lineno = 0;

    int dimension = -1;
    int capacity = -1;
    bool saw_euc2d = false;
    std::vector<Point> points;
    std::vector<bool> have_point;
    std::vector<long long> demands;
    std::vector<bool> have_demand;
    int depot_id = -1;

    enum class Section { Header, Coords, Demands, Depot, Done };
    Section section = Section::Header;

    auto require_dimension = [&](int ln) {
        if (dimension <= 0) throw ParseError("section before DIMENSION", ln);
        if (points.empty()) {
            points.assign(dimension, Point{});
            have_point.assign(dimension, false);
            demands.assign(dimension, 0);
            have_demand.assign(dimension, false);
        }
    };

    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        if (t == "EOF") break;

        if (t == "NODE_COORD_SECTION") {
            require_dimension(lineno);
            section = Section::Coords;
            continue;
        }
        if (t == "DEMAND_SECTION") {
            require_dimension(lineno);
            section = Section::Demands;
            continue;
        }
        if (t == "DEPOT_SECTION") {
            require_dimension(lineno);
            section = Section::Depot;
            continue;
        }
        if (t.size() > 8 && t.substr(t.size() - 8) == "_SECTION")
            throw ParseError("unsupported section: " + t, lineno);

        switch (section) {
            case Section::Header: {
                std::string key, value;
                if (!detail::split_header(t, key, value)) throw ParseError("unparseable header: " + t, lineno);
                if (key == "DIMENSION") {
                    dimension = std::atoi(value.c_str());
                    if (dimension < 2) throw ParseError("DIMENSION must be >= 2", lineno);
                } else if (key == "CAPACITY") {
                    capacity = std::atoi(value.c_str());
                    if (capacity <= 0) throw ParseError("CAPACITY must be positive", lineno);
                } else if (key == "EDGE_WEIGHT_TYPE") {
                    if (value != "EUC_2D") throw ParseError("unsupported EDGE_WEIGHT_TYPE: " + value, lineno);
                    saw_euc2d = true;
                } else if (key == "TYPE") {
                    if (value != "CVRP") throw ParseError("unsupported TYPE: " + value, lineno);
                }
                // NAME, COMMENT, and similar metadata are ignored.
                break;
            }
            case Section::Coords: {
                std::istringstream ss(t);
                int id;
                double x, y;
                if (!(ss >> id >> x >> y)) throw ParseError("malformed coordinate entry: " + t, lineno);
                if (id < 1 || id > dimension) throw ParseError("node id out of range: " + t, lineno);
                points[id - 1] = {x, y};
                have_point[id - 1] = true;
                break;
            }
            case Section::Demands: {
                std::istringstream ss(t);
                int id;
                long long d;
                if (!(ss >> id >> d)) throw ParseError("malformed demand entry: " + t, lineno);
                if (id < 1 || id > dimension) throw ParseError("node id out of range: " + t, lineno);
                demands[id - 1] = d;
                have_demand[id - 1] = true;
                break;
            }
            case Section::Depot: {
                std::istringstream ss(t);
                int id;
                if (!(ss >> id)) throw ParseError("malformed depot entry: " + t, lineno);
                if (id == -1) {
                    section = Section::Done;
                    break;
                }
                if (depot_id != -1) throw ParseError("multiple depot entries are not supported", lineno);
                if (id < 1 || id > dimension) throw ParseError("depot id out of range: " + t, lineno);
                depot_id = id;
                break;
            }
            case Section::Done:
                throw ParseError("content after DEPOT_SECTION terminator: " + t, lineno);
        }
    }

    if (dimension <= 0) throw ParseError("missing DIMENSION");
    if (capacity <= 0) throw ParseError("missing CAPACITY");
    if (!saw_euc2d) throw ParseError("missing EDGE_WEIGHT_TYPE : EUC_2D");
    if (depot_id == -1) throw ParseError("missing DEPOT_SECTION entry");
    for (int i = 0; i < dimension; ++i) {
        if (!have_point[i]) throw ParseError("no coordinates for node " + std::to_string(i + 1));
        if (!have_demand[i] && i + 1 != depot_id)
            throw ParseError("no demand for node " + std::to_string(i + 1));
    }
    if (demands[depot_id - 1] != 0) throw ParseError("depot demand must be 0");

    Instance inst;
    inst.capacity = capacity;
    inst.coords.push_back(points[depot_id - 1]);
    for (int i = 0; i < dimension; ++i) {
        if (i + 1 == depot_id) continue;
        if (demands[i] <= 0)
            throw ParseError("non-positive demand for customer node " + std::to_string(i + 1));
        if (demands[i] > capacity)
            throw ParseError("demand exceeds capacity for node " + std::to_string(i + 1));
        inst.coords.push_back(points[i]);
        inst.demands.push_back(static_cast<int>(demands[i]));
    }
    inst.validate();
    return inst;
}

// Reads an instance from text, sniffing JSON vs. VRPLIB.
inline Instance read_instance_text(const std::string& text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        json j = json::parse(text, nullptr, true, /*ignore_comments=*/false);
        return instance_from_json(j);
    }
    std::istringstream ss(text);
    return read_vrplib(ss);
}

inline Instance read_instance(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open instance file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return read_instance_text(buf.str());
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

inline void write_instance(const Instance& inst, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open file for writing: " + path);
    out << instance_to_json(inst).dump(2) << "\n";
}

inline json support_to_json(const SpatialSupport& s) {
    json pts = json::array();
    for (const auto& p : s.points) pts.push_back({p.x, p.y});
    return {{"points", std::move(pts)}, {"depot_index", s.depot_index}, {"rng_seed", s.rng_seed}};
}

inline SpatialSupport support_from_json(const json& j) {
    SpatialSupport s;
    try {
        for (const auto& row : j.at("points")) s.points.push_back({row[0].get<double>(), row[1].get<double>()});
        s.depot_index = j.at("depot_index").get<int>();
        s.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("support JSON: ") + e.what());
    }
    if (s.points.size() < 2 || s.depot_index < 0 || s.depot_index >= s.size())
        throw ParseError("support JSON: invalid point count or depot index");
    return s;
}

inline void write_support(const SpatialSupport& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open file for writing: " + path);
    out << support_to_json(s).dump(2) << "\n";
}

inline SpatialSupport read_support(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open support file: " + path);
    json j = json::parse(in);
    return support_from_json(j);
}

}  // namespace cfrs
