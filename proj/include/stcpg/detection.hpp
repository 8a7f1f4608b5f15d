#ifndef STCPG_DETECTION_HPP
#define STCPG_DETECTION_HPP

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "stcpg/core.hpp"

namespace stcpg {

// One symbolic detection: a detector firing on a time span with a confidence,
// optionally carrying role references to other detections.
struct Detection {
    std::string id;
    std::string detector;
    std::string concept;
    double t0 = 0.0;
    double t1 = 0.0;
    std::optional<double> x;
    std::optional<double> y;
    double confidence = 1.0;
    std::map<std::string, std::string> roles;  // agent / patient / location -> detection id

    SpatioTemporal annotation() const {
        SpatioTemporal at;
        at.t0 = t0;
        at.t1 = t1;
        at.x = x;
        at.y = y;
        return at;
    }
};

struct DetectionStream {
    std::vector<Detection> detections;  // sorted by t0
    double frame_rate = 1.0;
    std::string scene_id;

    void push(Detection d) {
        if (d.t0 > d.t1) throw ParseError("detection " + d.id + " has t0 > t1");
        if (d.confidence <= 0.0 || d.confidence > 1.0)
            throw ParseError("detection " + d.id + " confidence outside (0,1]");
        detections.push_back(std::move(d));
    }

    void finalize() {
        std::stable_sort(detections.begin(), detections.end(),
                         [](const Detection& a, const Detection& b) {
                             if (a.t0 != b.t0) return a.t0 < b.t0;
                             return a.id < b.id;
                         });
        std::set<std::string> ids;
        for (const auto& d : detections)
            if (!ids.insert(d.id).second) throw DuplicateId(d.id);
    }

    const Detection& by_id(const std::string& id) const {
        for (const auto& d : detections)
            if (d.id == id) return d;
        throw UnknownConcept("detection " + id);
    }
    bool has(const std::string& id) const {
        for (const auto& d : detections)
            if (d.id == id) return true;
        return false;
    }

    // JSON Lines, one detection per line. An optional leading meta line
    // without "id" carries scene_id and frame_rate.
    static DetectionStream load_jsonl(std::istream& in, const std::string& name = "stream");
    static DetectionStream load_file(const std::string& path);
    std::string to_jsonl() const;
};

inline DetectionStream DetectionStream::load_jsonl(std::istream& in, const std::string& name) {
    DetectionStream s;
    s.scene_id = name;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = line;
        t.erase(0, t.find_first_not_of(" \t\r\n"));
        if (t.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(t);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(name + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!j.contains("id")) {
            s.scene_id = j.value("scene_id", s.scene_id);
            s.frame_rate = j.value("frame_rate", s.frame_rate);
            if (s.frame_rate <= 0.0) throw ParseError("frame_rate must be positive");
            continue;
        }
        Detection d;
        d.id = j.at("id").get<std::string>();
        d.detector = j.value("detector", "");
        d.concept = j.at("concept").get<std::string>();
        d.t0 = j.value("t0", 0.0);
        d.t1 = j.value("t1", d.t0);
        if (j.contains("x")) d.x = j.at("x").get<double>();
        if (j.contains("y")) d.y = j.at("y").get<double>();
        d.confidence = j.value("conf", 1.0);
        if (j.contains("roles"))
            for (const auto& [k, v] : j.at("roles").items()) d.roles[k] = v.get<std::string>();
        s.push(d);
    }
    s.finalize();
    return s;
}

inline DetectionStream DetectionStream::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open stream file " + path);
    auto slash = path.find_last_of('/');
    return load_jsonl(in, slash == std::string::npos ? path : path.substr(slash + 1));
}

inline std::string DetectionStream::to_jsonl() const {
    nlohmann::ordered_json meta;
    meta["scene_id"] = scene_id;
    meta["frame_rate"] = frame_rate;
    std::string out = meta.dump() + "\n";
    for (const auto& d : detections) {
        nlohmann::ordered_json j;
        j["id"] = d.id;
        j["detector"] = d.detector;
        j["concept"] = d.concept;
        j["t0"] = d.t0;
        j["t1"] = d.t1;
        if (d.x) j["x"] = *d.x;
        if (d.y) j["y"] = *d.y;
        j["conf"] = d.confidence;
        if (!d.roles.empty()) {
            nlohmann::ordered_json r;
            for (const auto& [k, v] : d.roles) r[k] = v;
            j["roles"] = r;
        }
        out += j.dump() + "\n";
    }
    return out;
}

}  // namespace stcpg

#endif  // STCPG_DETECTION_HPP
