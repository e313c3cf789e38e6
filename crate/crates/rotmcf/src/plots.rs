//! Gnuplot scripts for the CSV files the commands write. Each script reads
//! its data from the directory it sits in and renders a PNG next to it.

fn header(title: &str, png: &str) -> String {
    format!(
        "# gnuplot script; run with `gnuplot {png}.gp` inside the output directory\n\
         set terminal pngcairo size 900,650\n\
         set output '{png}.png'\n\
         set datafile separator ','\n\
         set key autotitle columnhead\n\
         set title '{title}'\n\
         set grid\n"
    )
}

pub fn catenoid(n: u32) -> String {
    let mut s = header(&format!("catenoid profiles, n = {n}"), "catenoid");
    s.push_str(
        "set multiplot layout 1,2\n\
         set xlabel 'C'\nset ylabel 'Y_C'\n\
         plot 'catenoid_scan.csv' using 1:2 with linespoints\n\
         set xlabel 'x'\nset ylabel 'y'\nset size ratio -1\n\
         plot 'catenoid_profile.csv' using 1:2 with lines, \\\n\
         \x20    'catenoid_barrier.csv' using 1:2 with lines lw 2\n\
         unset multiplot\n",
    );
    s
}

pub fn angenent(lambda: f64) -> String {
    let mut s = header(&format!("closed lambda-geodesic, lambda = {lambda}"), "angenent");
    s.push_str(
        "set size ratio -1\n\
         set xlabel 'axial'\nset ylabel 'radial'\n\
         plot 'angenent_curve.csv' using 1:2 with lines lw 2\n",
    );
    s
}

pub fn flow(prefix: &str) -> String {
    let mut s = header("graph flow", prefix);
    s.push_str(&format!(
        "set multiplot layout 1,2\n\
         set xlabel 't'\nset ylabel 'head, height'\n\
         plot '{prefix}_trace.csv' using 1:2 with lines, '' using 1:3 with lines\n\
         set xlabel 'x'\nset ylabel 'y'\nunset key\n\
         plot '{prefix}_snapshots.csv' using 3:4:1 with lines palette\n\
         unset multiplot\n"
    ));
    s
}

pub fn bisect() -> String {
    let mut s = header("bisection for the critical parameter", "bisect");
    s.push_str(
        "set multiplot layout 1,2\n\
         set xlabel 'delta'\nset ylabel 'outcome time'\nset logscale y\n\
         plot 'transcript.csv' using 2:($4 == 1 ? $3 : 1/0) title 'pinched' with points pt 7, \\\n\
         \x20    '' using 2:($4 == 0 ? $3 : 1/0) title 'not pinched' with points pt 6\n\
         unset logscale y\n\
         set xlabel 't'\nset ylabel 'head, height'\n\
         plot 'near_critical_trace.csv' using 1:2 with lines, '' using 1:3 with lines\n\
         unset multiplot\n",
    );
    s
}

#[cfg(test)]
mod tests {
    #[test]
    fn scripts_name_their_inputs_and_outputs() {
        let s = super::flow("run");
        assert!(s.contains("'run_trace.csv'") && s.contains("set output 'run.png'"));
        assert!(super::bisect().contains("near_critical_trace.csv"));
        assert!(super::catenoid(2).contains("catenoid_scan.csv"));
    }
}
