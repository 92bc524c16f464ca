#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hfsig {

enum class ModemKind {
    ook,          // on-off keying (Morse)
    fsk,          // 2-tone continuous-phase FSK (RTTY family, Hell)
    mfsk,         // M-tone FSK
    gfsk,         // Gaussian-smoothed M-tone FSK
    bpsk,         // Hann-keyed differential BPSK (PSK31 family)
    qpsk,         // Hann-keyed differential QPSK
    psk8_serial,  // serial-tone 8PSK with RRC shaping
    am,           // envelope AM with voice surrogate
    usb,          // upper-sideband voice surrogate
    lsb,          // lower-sideband voice surrogate
    carrier,      // bare tone
};

inline const char* kind_name(ModemKind k) {
    switch (k) {
        case ModemKind::ook: return "ook";
        case ModemKind::fsk: return "fsk";
        case ModemKind::mfsk: return "mfsk";
        case ModemKind::gfsk: return "gfsk";
        case ModemKind::bpsk: return "bpsk";
        case ModemKind::qpsk: return "qpsk";
        case ModemKind::psk8_serial: return "psk8_serial";
        case ModemKind::am: return "am";
        case ModemKind::usb: return "usb";
        case ModemKind::lsb: return "lsb";
        case ModemKind::carrier: return "carrier";
    }
    return "?";
}

inline ModemKind parse_kind(const std::string& s) {
    static const std::map<std::string, ModemKind> table = {
        {"ook", ModemKind::ook},       {"fsk", ModemKind::fsk},
        {"mfsk", ModemKind::mfsk},     {"gfsk", ModemKind::gfsk},
        {"bpsk", ModemKind::bpsk},     {"qpsk", ModemKind::qpsk},
        {"psk8_serial", ModemKind::psk8_serial},
        {"am", ModemKind::am},         {"usb", ModemKind::usb},
        {"lsb", ModemKind::lsb},       {"carrier", ModemKind::carrier},
    };
    const auto it = table.find(s);
    if (it == table.end())
        throw std::invalid_argument("unknown modulator kind: " + s);
    return it->second;
}

// One registered transmission mode.  params keys follow amateur/commercial
// conventions: baud (Bd), shift_hz, spacing_hz, tones, wpm, edge_ms, bt,
// rolloff, audio_low_hz, audio_high_hz, max_offset_hz.
struct ModeSpec {
    uint16_t label_id = 0;
    std::string name;
    ModemKind kind = ModemKind::carrier;
    std::map<std::string, double> params;
    double nominal_bandwidth_hz = 0.0;

    double param(const std::string& key) const {
        const auto it = params.find(key);
        if (it == params.end())
            throw std::invalid_argument("mode " + name + " missing param " + key);
        return it->second;
    }
    double param_or(const std::string& key, double fallback) const {
        const auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    }
};

using ModeRegistry = std::vector<ModeSpec>;

inline void validate_registry(const ModeRegistry& reg) {
    if (reg.empty()) throw std::invalid_argument("empty mode registry");
    for (size_t i = 0; i < reg.size(); ++i) {
        const ModeSpec& m = reg[i];
        if (m.label_id != i)
            throw std::invalid_argument("mode label_ids must be contiguous from 0");
        if (m.name.empty()) throw std::invalid_argument("mode with empty name");
        if (!(m.nominal_bandwidth_hz > 0.0) || m.nominal_bandwidth_hz > 4000.0)
            throw std::invalid_argument("mode " + m.name +
                                        ": nominal bandwidth out of (0, 4000]");
        for (size_t j = i + 1; j < reg.size(); ++j)
            if (reg[j].name == m.name)
                throw std::invalid_argument("duplicate mode name: " + m.name);
        switch (m.kind) {
            case ModemKind::fsk:
                m.param("baud");
                m.param("shift_hz");
                break;
            case ModemKind::mfsk:
            case ModemKind::gfsk:
                m.param("baud");
                m.param("spacing_hz");
                m.param("tones");
                break;
            case ModemKind::bpsk:
            case ModemKind::qpsk:
            case ModemKind::psk8_serial:
                m.param("baud");
                break;
            case ModemKind::ook:
                m.param("wpm");
                break;
            default:
                break;
        }
    }
}

inline ModeRegistry default_registry() {
    ModeRegistry reg;
    auto add = [&reg](const std::string& name, ModemKind kind, double bw,
                      std::map<std::string, double> params) {
        ModeSpec m;
        m.label_id = static_cast<uint16_t>(reg.size());
        m.name = name;
        m.kind = kind;
        m.params = std::move(params);
        m.nominal_bandwidth_hz = bw;
        reg.push_back(std::move(m));
    };
    add("morse", ModemKind::ook, 500,
        {{"wpm", 20}, {"edge_ms", 6}, {"max_offset_hz", 200}});
    add("rtty_45_170", ModemKind::fsk, 500,
        {{"baud", 45.45}, {"shift_hz", 170}, {"tones", 2}});
    add("rtty_50_450", ModemKind::fsk, 800,
        {{"baud", 50}, {"shift_hz", 450}, {"tones", 2}});
    add("rtty_75_170", ModemKind::fsk, 600,
        {{"baud", 75}, {"shift_hz", 170}, {"tones", 2}});
    add("fsk_50_850", ModemKind::fsk, 1200,
        {{"baud", 50}, {"shift_hz", 850}, {"tones", 2}});
    add("psk31", ModemKind::bpsk, 120, {{"baud", 31.25}});
    add("psk63", ModemKind::bpsk, 220, {{"baud", 62.5}});
    add("psk125", ModemKind::bpsk, 420, {{"baud", 125}});
    add("qpsk63", ModemKind::qpsk, 220, {{"baud", 62.5}});
    add("mfsk16", ModemKind::mfsk, 420,
        {{"baud", 15.625}, {"spacing_hz", 15.625}, {"tones", 16}});
    add("mfsk8_olivia_like", ModemKind::mfsk, 500,
        {{"baud", 31.25}, {"spacing_hz", 31.25}, {"tones", 8}});
    add("gfsk8_ft8_like", ModemKind::gfsk, 120,
        {{"baud", 6.25}, {"spacing_hz", 6.25}, {"tones", 8}, {"bt", 2}});
    add("serialtone_psk8_2400bd", ModemKind::psk8_serial, 3400,
        {{"baud", 2400}, {"rolloff", 0.35}, {"max_offset_hz", 0}});
    add("am_broadcast", ModemKind::am, 3400, {{"audio_high_hz", 1500}});
    add("usb_voice", ModemKind::usb, 2600,
        {{"audio_low_hz", 300}, {"audio_high_hz", 2700}});
    add("lsb_voice", ModemKind::lsb, 2600,
        {{"audio_low_hz", 300}, {"audio_high_hz", 2700}});
    add("sine_carrier", ModemKind::carrier, 60, {});
    add("hell_fsk_like", ModemKind::fsk, 500,
        {{"baud", 122.5}, {"shift_hz", 122.5}, {"tones", 2}});
    validate_registry(reg);
    return reg;
}

inline const ModeSpec& find_mode(const ModeRegistry& reg, const std::string& name) {
    for (const ModeSpec& m : reg)
        if (m.name == name) return m;
    throw std::invalid_argument("unregistered mode");
}

// Text format, one mode per line: name kind bandwidth_hz key=value...
// label ids follow file order.  '#' starts a comment.
inline void save_registry(const ModeRegistry& reg, std::ostream& os) {
    os << "# mode registry: name kind bandwidth_hz key=value...\n";
    char buf[64];
    for (const ModeSpec& m : reg) {
        os << m.name << " " << kind_name(m.kind);
        std::snprintf(buf, sizeof buf, " %.10g", m.nominal_bandwidth_hz);
        os << buf;
        for (const auto& [k, v] : m.params) {
            std::snprintf(buf, sizeof buf, " %s=%.10g", k.c_str(), v);
            os << buf;
        }
        os << "\n";
    }
}

inline ModeRegistry load_registry(std::istream& is) {
    ModeRegistry reg;
    std::string line;
    size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string name, kind;
        double bw;
        if (!(ls >> name)) continue;
        if (!(ls >> kind >> bw))
            throw std::invalid_argument("registry line " + std::to_string(lineno) +
                                        ": expected 'name kind bandwidth'");
        ModeSpec m;
        m.label_id = static_cast<uint16_t>(reg.size());
        m.name = name;
        m.kind = parse_kind(kind);
        m.nominal_bandwidth_hz = bw;
        std::string kv;
        while (ls >> kv) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos || eq == 0)
                throw std::invalid_argument("registry line " + std::to_string(lineno) +
                                            ": bad param '" + kv + "'");
            m.params[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
        }
        reg.push_back(std::move(m));
    }
    validate_registry(reg);
    return reg;
}

inline ModeRegistry load_registry_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open mode registry: " + path);
    return load_registry(f);
}

inline void save_registry_file(const ModeRegistry& reg, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open output file: " + path);
    save_registry(reg, f);
    if (!f) throw std::runtime_error("failed writing: " + path);
}

}  // namespace hfsig
