// SPDX-License-Identifier: Apache-2.0
#include "scdgmap/android.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <nlohmann/json.hpp>

#include "scdgmap/error.hpp"

namespace scdgmap {

nlohmann::json api_event_to_json(const ApiEvent& e) {
    return {{"t_us", e.timestamp_us}, {"pid", e.pid}, {"tid", e.tid},
            {"api", e.api_name},      {"tag", e.tag}};
}

ApiEvent api_event_from_json(const nlohmann::json& j) {
    ApiEvent e;
    e.timestamp_us = j.at("t_us").get<std::int64_t>();
    e.pid = j.at("pid").get<int>();
    e.tid = j.at("tid").get<int>();
    e.api_name = j.at("api").get<std::string>();
    e.tag = j.at("tag").get<std::string>();
    return e;
}

namespace {

const std::regex kLogcatLine(
    R"(^\s*(\d+)\.(\d{1,6})\s+(\d+)\s+(\d+)\s+([A-Z])\s+([^\s:][^:]*):\s?(.*)$)");

} // namespace

ApiEventLoad load_api_events_text(std::string_view text, const LogcatConfig& config) {
    ApiEventLoad out;
    std::size_t line_number = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        std::string line((nl == std::string_view::npos) ? text.substr(start)
                                                        : text.substr(start, nl - start));
        start = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;

        std::smatch m;
        if (!std::regex_match(line, m, kLogcatLine)) {
            ++out.ignored_count;
            continue;
        }
        std::string tag = m[6].str();
        while (!tag.empty() && tag.back() == ' ') tag.pop_back();
        if (tag != config.marker_tag) {
            ++out.ignored_count;
            continue;
        }

        std::string frac = m[2].str();
        frac.resize(6, '0');
        ApiEvent e;
        e.timestamp_us = std::stoll(m[1].str()) * 1000000 + std::stoll(frac);
        e.pid = std::stoi(m[3].str());
        e.tid = std::stoi(m[4].str());
        e.tag = tag;
        e.api_name = m[7].str();
        while (!e.api_name.empty() && e.api_name.back() == ' ') e.api_name.pop_back();
        if (e.api_name.empty() || e.api_name.find('.') == std::string::npos)
            throw MalformedLine(line_number, 0,
                                "API marker line without a qualified method name");
        out.events.push_back(std::move(e));
    }

    std::stable_sort(out.events.begin(), out.events.end(),
                     [](const ApiEvent& a, const ApiEvent& b) {
                         return a.timestamp_us < b.timestamp_us;
                     });
    return out;
}

ApiEventLoad load_api_events(const std::string& path, const LogcatConfig& config) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open logcat file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_api_events_text(buf.str(), config);
}

PermissionManifest parse_manifest_text(const std::string& xml,
                                       const std::map<int, std::string>& pid_map) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(xml);
    try {
        pt::read_xml(in, tree);
    } catch (const pt::xml_parser_error& e) {
        throw XmlParseError(e.line(), e.message());
    }

    auto manifest = tree.get_child_optional("manifest");
    if (!manifest) throw XmlParseError(0, "no <manifest> root element");

    PermissionManifest out;
    out.packname = manifest->get<std::string>("<xmlattr>.package", "");
    if (out.packname.empty()) throw MissingPackageName();

    std::set<std::string> seen;
    for (const auto& [key, child] : *manifest) {
        if (key != "uses-permission") continue;
        std::string name = child.get<std::string>("<xmlattr>.android:name", "");
        if (name.empty()) continue;
        if (seen.insert(name).second) out.permissions.push_back(std::move(name));
    }

    for (const auto& [pid, pkg] : pid_map)
        if (pkg == out.packname) { out.pid = pid; break; }
    return out;
}

PermissionManifest parse_manifest(const std::string& path,
                                  const std::map<int, std::string>& pid_map) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open manifest: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_manifest_text(buf.str(), pid_map);
}

ApiPermissionMap parse_api_permission_map(const std::string& json_text) {
    // Duplicate object keys are silently collapsed by the DOM parser, so
    // duplicates are caught with a callback during the parse.
    std::set<std::string> keys;
    auto callback = [&](int depth, nlohmann::json::parse_event_t event,
                        nlohmann::json& parsed) {
        if (event == nlohmann::json::parse_event_t::key && depth == 1) {
            std::string key = parsed.get<std::string>();
            if (!keys.insert(key).second) throw DuplicateApiEntry(key);
        }
        return true;
    };

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text, callback);
    } catch (const DuplicateApiEntry&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("api-permission map: ") + e.what());
    }
    if (!j.is_object()) throw SchemaError("api-permission map must be a JSON object");

    static const std::regex kPermission("[A-Za-z_.]+");
    ApiPermissionMap map;
    for (const auto& [api, perms] : j.items()) {
        if (!perms.is_array())
            throw SchemaError("api-permission map entry for " + api + " must be an array");
        for (const auto& p : perms) {
            if (!p.is_string() || !std::regex_match(p.get<std::string>(), kPermission))
                throw SchemaError("bad permission string under " + api);
            map.entries[api].insert(p.get<std::string>());
        }
        map.entries[api];  // keep APIs mapped to the empty set
    }
    return map;
}

ApiPermissionMap load_api_permission_map(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open api-permission map: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_api_permission_map(buf.str());
}

} // namespace scdgmap
