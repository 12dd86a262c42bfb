//! Gnuplot scripts over the emitted CSV files.

use std::fmt::Write;

const PREAMBLE: &str = "set datafile separator ','\nset terminal pngcairo size 1200,500\n";

/// Mode profiles and the index step, as in a mode-structure figure.
pub fn modes(count: usize) -> String {
    let mut s = String::from(PREAMBLE);
    s.push_str("set output 'modes.png'\nset xlabel 'x (um)'\nset ylabel 'field'\nset y2label 'n'\nset y2tics\n");
    s.push_str("plot 'modes.csv' using 1:2 axes x1y2 with lines lc 'gray' title 'n(x)'");
    for j in 0..count {
        let _ = write!(s, ", '' using 1:{} with lines title 'TE{j}'", j + 3);
    }
    s.push('\n');
    s
}

/// Intensity maps of every run and channel plus modal powers along z.
pub fn propagation(runs: usize, channels: usize, labels: &[String]) -> String {
    let mut s = String::from(PREAMBLE);
    s.push_str("set xlabel 'z (um)'\nset ylabel 'x (um)'\nset palette rgb 33,13,10\nunset key\n");
    for r in 0..runs {
        for c in 0..channels {
            let label = labels.get(r).map_or(String::new(), |l| format!(" {l}"));
            let _ = write!(
                s,
                "set output 'field_run{r}_ch{c}.png'\nset title 'run {r}{label}, channel {c}'\n\
                 plot 'trajectory.csv' using 3:4:(($1=={r} && $2=={c}) ? $7 : 1/0) with points pt 5 ps 0.2 palette\n"
            );
        }
    }
    s.push_str("set key\nset ylabel 'modal power'\n");
    for r in 0..runs {
        let _ = write!(
            s,
            "set output 'modes_run{r}.png'\nset title 'run {r}'\n\
             plot 'mode_powers.csv' using 3:(($1=={r}) ? $6 : 1/0) with points pt 7 ps 0.3 title 'TE0', \
             '' using 3:(($1=={r}) ? $7 : 1/0) with points pt 7 ps 0.3 title 'TE1'\n"
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripts_reference_their_data() {
        assert!(modes(2).contains("using 1:4"));
        let p = propagation(2, 2, &["|0>".into(), "|1>".into()]);
        assert!(p.contains("field_run1_ch1.png") && p.contains("mode_powers.csv") && p.contains("run 1 |1>"));
    }
}
