#include "mopac/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "mopac/errors.hpp"

namespace mopac {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

std::optional<double> parse_opt(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return std::stod(s);
}

} // namespace

std::string MetricsRow::header() {
    return "epoch,env_steps,eval_return_mean,eval_return_std,train_return_mean,"
           "model_val_l2,mpr_mean_cost,mpr_ess,v_loss,q1_loss,q2_loss,policy_loss,"
           "alpha,wall_time_s";
}

std::string MetricsRow::to_csv() const {
    std::ostringstream out;
    out << epoch << ',' << env_steps << ',' << fmt(eval_return_mean) << ','
        << fmt(eval_return_std) << ',' << fmt(train_return_mean) << ','
        << fmt(model_val_l2) << ',' << fmt(mpr_mean_cost) << ',' << fmt(mpr_ess) << ','
        << fmt(v_loss) << ',' << fmt(q1_loss) << ',' << fmt(q2_loss) << ','
        << fmt(policy_loss) << ',' << fmt(alpha) << ',' << fmt(wall_time_s);
    return out.str();
}

MetricsWriter::MetricsWriter(const std::string& path) : path_(path) {
    std::ofstream out(path_, std::ios::trunc);
    if (!out) throw ContractViolation("MetricsWriter: cannot open " + path_);
    out << MetricsRow::header() << '\n';
    out.flush();
}

void MetricsWriter::append(const MetricsRow& row) {
    std::ofstream out(path_, std::ios::app);
    if (!out) throw ContractViolation("MetricsWriter: cannot reopen " + path_);
    out << row.to_csv() << '\n';
    out.flush();
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ContractViolation("read_metrics_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
        throw ContractViolation("read_metrics_csv: empty file " + path);
    std::vector<MetricsRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        cells.resize(14);
        MetricsRow r;
        r.epoch = std::stoi(cells[0]);
        r.env_steps = std::stol(cells[1]);
        r.eval_return_mean = std::stod(cells[2]);
        r.eval_return_std = std::stod(cells[3]);
        r.train_return_mean = parse_opt(cells[4]);
        r.model_val_l2 = parse_opt(cells[5]);
        r.mpr_mean_cost = parse_opt(cells[6]);
        r.mpr_ess = parse_opt(cells[7]);
        r.v_loss = parse_opt(cells[8]);
        r.q1_loss = parse_opt(cells[9]);
        r.q2_loss = parse_opt(cells[10]);
        r.policy_loss = parse_opt(cells[11]);
        r.alpha = parse_opt(cells[12]);
        r.wall_time_s = cells[13].empty() ? 0.0 : std::stod(cells[13]);
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace mopac
