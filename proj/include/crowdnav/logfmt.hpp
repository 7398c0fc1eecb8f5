#pragma once

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "crowdnav/config.hpp"
#include "crowdnav/rewards.hpp"
#include "crowdnav/sim.hpp"

namespace crowdnav {

/// Line-delimited episode trace. Layout (documented in the README):
///   #CROWDNAVLOG v1
///   run_id=<hex> / policy=<id> / episode_seed=<n>
///   config.<key>=<value>            (scenario echo, sorted)
///   radii=<r0>;<r1>;...
///   init rob=px,py,vx,vy,heading goal=gx,gy humans=px,py;...
///   step t=.. time=.. rob=.. act=.. event=.. dmin=..
///        rew=total,goal,col,disc,pred,bel,pot mask=0101 humans=.. beliefs=id,age,x,y;..
/// Every step line is the post-action snapshot; the mask and beliefs on it are
/// the ones observed before the action. The last line carries the terminal event.
struct LogStep {
    int t = 0;
    double sim_time = 0.0;
    Vec2 robot_pos, robot_vel;
    double heading = 0.0;
    Vec2 action;
    EventKind event = EventKind::Running;
    double d_min = 0.0;
    RewardBreakdown reward;
    std::vector<std::uint8_t> mask;
    std::vector<Vec2> humans;
    struct BeliefGlyph {
        int id = 0;
        int age = 0;
        Vec2 pos;
    };
    std::vector<BeliefGlyph> beliefs;
};

struct EpisodeLog {
    std::string run_id;
    std::string policy;
    std::uint64_t episode_seed = 0;
    KvConfig config;
    std::vector<double> human_radii;
    Vec2 init_robot_pos, init_robot_vel;
    double init_heading = 0.0;
    Vec2 goal;
    std::vector<Vec2> init_humans;
    std::vector<LogStep> steps;

    bool success() const {
        return !steps.empty() && steps.back().event == EventKind::ReachedGoal;
    }
    EventKind terminal_event() const {
        return steps.empty() ? EventKind::Running : steps.back().event;
    }
    double terminal_time() const { return steps.empty() ? 0.0 : steps.back().sim_time; }

    double path_length() const {
        double pl = 0.0;
        Vec2 prev = init_robot_pos;
        for (const LogStep& s : steps) {
            pl += distance(prev, s.robot_pos);
            prev = s.robot_pos;
        }
        return pl;
    }
};

namespace logfmt {

inline std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline std::string fmt_vec(const Vec2& v) { return fmt(v.x) + "," + fmt(v.y); }

inline void write_step(std::ostream& os, const LogStep& s) {
    os << "step t=" << s.t << " time=" << fmt(s.sim_time) << " rob=" << fmt_vec(s.robot_pos)
       << "," << fmt_vec(s.robot_vel) << "," << fmt(s.heading)
       << " act=" << fmt_vec(s.action) << " event=" << event_name(s.event)
       << " dmin=" << fmt(s.d_min) << " rew=" << fmt(s.reward.total) << ","
       << fmt(s.reward.goal) << "," << fmt(s.reward.col) << "," << fmt(s.reward.disc) << ","
       << fmt(s.reward.pred) << "," << fmt(s.reward.bel) << "," << fmt(s.reward.pot)
       << " mask=";
    for (auto m : s.mask) os << (m ? '1' : '0');
    os << " humans=";
    for (std::size_t i = 0; i < s.humans.size(); ++i) {
        if (i) os << ';';
        os << fmt_vec(s.humans[i]);
    }
    os << " beliefs=";
    for (std::size_t i = 0; i < s.beliefs.size(); ++i) {
        if (i) os << ';';
        os << s.beliefs[i].id << ',' << s.beliefs[i].age << ','
           << fmt_vec(s.beliefs[i].pos);
    }
    os << "\n";
}

}  // namespace logfmt

inline void write_episode_log(std::ostream& os, const EpisodeLog& log) {
    os << "#CROWDNAVLOG v1\n";
    os << "run_id=" << log.run_id << "\n";
    os << "policy=" << log.policy << "\n";
    os << "episode_seed=" << log.episode_seed << "\n";
    for (const auto& [k, v] : log.config.values()) os << "config." << k << "=" << v << "\n";
    os << "radii=";
    for (std::size_t i = 0; i < log.human_radii.size(); ++i) {
        if (i) os << ';';
        os << logfmt::fmt(log.human_radii[i]);
    }
    os << "\n";
    os << "init rob=" << logfmt::fmt_vec(log.init_robot_pos) << ","
       << logfmt::fmt_vec(log.init_robot_vel) << "," << logfmt::fmt(log.init_heading)
       << " goal=" << logfmt::fmt_vec(log.goal) << " humans=";
    for (std::size_t i = 0; i < log.init_humans.size(); ++i) {
        if (i) os << ';';
        os << logfmt::fmt_vec(log.init_humans[i]);
    }
    os << "\n";
    for (const LogStep& s : log.steps) logfmt::write_step(os, s);
}

namespace logfmt {

struct ParseError : std::runtime_error {
    ParseError(int line, const std::string& what)
        : std::runtime_error("episode log parse error at line " + std::to_string(line) +
                             ": " + what) {}
};

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_double(const std::string& s, int line) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (...) {
        throw ParseError(line, "bad number '" + s + "'");
    }
}

inline Vec2 parse_vec(const std::string& s, int line) {
    auto parts = split(s, ',');
    if (parts.size() != 2) throw ParseError(line, "expected x,y in '" + s + "'");
    return {parse_double(parts[0], line), parse_double(parts[1], line)};
}

/// key=value tokens separated by single spaces; values never contain spaces.
inline std::string expect_token(const std::vector<std::string>& tokens, std::size_t idx,
                                const std::string& key, int line) {
    if (idx >= tokens.size()) throw ParseError(line, "missing token '" + key + "'");
    const std::string& t = tokens[idx];
    if (t.rfind(key + "=", 0) != 0)
        throw ParseError(line, "expected '" + key + "=...', got '" + t + "'");
    return t.substr(key.size() + 1);
}

}  // namespace logfmt

inline EpisodeLog parse_episode_log(std::istream& is) {
    using namespace logfmt;
    EpisodeLog log;
    std::string line;
    int lineno = 0;

    if (!std::getline(is, line)) throw ParseError(1, "empty file");
    ++lineno;
    if (line != "#CROWDNAVLOG v1") throw ParseError(1, "bad magic line");

    bool saw_init = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line.rfind("run_id=", 0) == 0) {
            log.run_id = line.substr(7);
        } else if (line.rfind("policy=", 0) == 0) {
            log.policy = line.substr(7);
        } else if (line.rfind("episode_seed=", 0) == 0) {
            log.episode_seed = std::strtoull(line.c_str() + 13, nullptr, 10);
        } else if (line.rfind("config.", 0) == 0) {
            auto eq = line.find('=');
            if (eq == std::string::npos) throw ParseError(lineno, "config line without '='");
            log.config.set(line.substr(7, eq - 7), line.substr(eq + 1));
        } else if (line.rfind("radii=", 0) == 0) {
            std::string v = line.substr(6);
            if (!v.empty())
                for (const auto& r : split(v, ';'))
                    log.human_radii.push_back(parse_double(r, lineno));
        } else if (line.rfind("init ", 0) == 0) {
            auto tokens = split(line, ' ');
            std::string rob = expect_token(tokens, 1, "rob", lineno);
            auto parts = split(rob, ',');
            if (parts.size() != 5) throw ParseError(lineno, "init rob needs 5 numbers");
            log.init_robot_pos = {parse_double(parts[0], lineno), parse_double(parts[1], lineno)};
            log.init_robot_vel = {parse_double(parts[2], lineno), parse_double(parts[3], lineno)};
            log.init_heading = parse_double(parts[4], lineno);
            log.goal = parse_vec(expect_token(tokens, 2, "goal", lineno), lineno);
            std::string humans = expect_token(tokens, 3, "humans", lineno);
            if (!humans.empty())
                for (const auto& h : split(humans, ';'))
                    log.init_humans.push_back(parse_vec(h, lineno));
            saw_init = true;
        } else if (line.rfind("step ", 0) == 0) {
            if (!saw_init) throw ParseError(lineno, "step before init");
            auto tokens = split(line, ' ');
            LogStep s;
            s.t = static_cast<int>(parse_double(expect_token(tokens, 1, "t", lineno), lineno));
            s.sim_time = parse_double(expect_token(tokens, 2, "time", lineno), lineno);
            auto rob = split(expect_token(tokens, 3, "rob", lineno), ',');
            if (rob.size() != 5) throw ParseError(lineno, "step rob needs 5 numbers");
            s.robot_pos = {parse_double(rob[0], lineno), parse_double(rob[1], lineno)};
            s.robot_vel = {parse_double(rob[2], lineno), parse_double(rob[3], lineno)};
            s.heading = parse_double(rob[4], lineno);
            s.action = parse_vec(expect_token(tokens, 4, "act", lineno), lineno);
            s.event = event_from_name(expect_token(tokens, 5, "event", lineno));
            s.d_min = parse_double(expect_token(tokens, 6, "dmin", lineno), lineno);
            auto rew = split(expect_token(tokens, 7, "rew", lineno), ',');
            if (rew.size() != 7) throw ParseError(lineno, "rew needs 7 numbers");
            s.reward.total = parse_double(rew[0], lineno);
            s.reward.goal = parse_double(rew[1], lineno);
            s.reward.col = parse_double(rew[2], lineno);
            s.reward.disc = parse_double(rew[3], lineno);
            s.reward.pred = parse_double(rew[4], lineno);
            s.reward.bel = parse_double(rew[5], lineno);
            s.reward.pot = parse_double(rew[6], lineno);
            std::string mask = expect_token(tokens, 8, "mask", lineno);
            for (char c : mask) {
                if (c != '0' && c != '1') throw ParseError(lineno, "mask must be 0/1");
                s.mask.push_back(c == '1');
            }
            std::string humans = expect_token(tokens, 9, "humans", lineno);
            if (!humans.empty())
                for (const auto& h : split(humans, ';')) s.humans.push_back(parse_vec(h, lineno));
            std::string beliefs = expect_token(tokens, 10, "beliefs", lineno);
            if (!beliefs.empty()) {
                for (const auto& b : split(beliefs, ';')) {
                    auto parts = split(b, ',');
                    if (parts.size() != 4) throw ParseError(lineno, "belief needs id,age,x,y");
                    LogStep::BeliefGlyph g;
                    g.id = static_cast<int>(parse_double(parts[0], lineno));
                    g.age = static_cast<int>(parse_double(parts[1], lineno));
                    g.pos = {parse_double(parts[2], lineno), parse_double(parts[3], lineno)};
                    s.beliefs.push_back(g);
                }
            }
            log.steps.push_back(std::move(s));
        } else if (line[0] == '#') {
            continue;  // comment
        } else {
            throw ParseError(lineno, "unrecognized line: " + line);
        }
    }
    if (!saw_init) throw ParseError(lineno, "log has no init line");
    return log;
}

}  // namespace crowdnav
