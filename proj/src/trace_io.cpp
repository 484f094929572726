#include "tatonnement/engine.hpp"

#include <cstdio>
#include <ostream>

namespace tat {

void write_csv_header(std::ostream& out) {
  out << "t,kind,good,p_before,p_after,x,x_bar,z_bar_true,z_bar_reported,stock,w_tilde,zone,"
         "phi_total,S_total\n";
}

void write_csv_row(std::ostream& out, const EventRecord& e) {
  char buf[512];
  if (e.kind == EventKind::day_boundary) {
    std::snprintf(buf, sizeof buf, "%.12g,%s,-1,,,,,,,,,,%.12g,%.12g\n", e.t, to_string(e.kind).c_str(),
                  e.phi_after, e.S);
  } else {
    std::snprintf(buf, sizeof buf,
                  "%.12g,%s,%d,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%d,%.12g,%.12g\n", e.t,
                  to_string(e.kind).c_str(), e.good, e.p_before, e.p_after, e.x, e.x_bar,
                  e.z_bar_true, e.z_bar_reported, e.stock, e.w_tilde, e.zone, e.phi_after, e.S);
  }
  out << buf;
}

}  // namespace tat
