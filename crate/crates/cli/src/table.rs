//! Plain-text rendering of deterministic tables.

use orderctx::scenario::party_label;
use orderctx::DeterministicAssignment;

fn headers(n: usize) -> (Vec<String>, Vec<String>) {
    if n == 2 {
        return (vec!["x".into(), "y".into()], vec!["a".into(), "b".into()]);
    }
    (
        (0..n).map(|p| format!("x{}", party_label(p))).collect(),
        (0..n).map(|p| format!("a{}", party_label(p))).collect(),
    )
}

fn line(cells: &[String], widths: &[usize]) -> String {
    cells
        .iter()
        .zip(widths)
        .map(|(c, w)| format!("{c:>w$}"))
        .collect::<Vec<_>>()
        .join(" ")
}

type Row = (Vec<String>, Vec<String>);

fn grid(head_in: Vec<String>, head_out: Vec<String>, rows: Vec<Row>) -> String {
    let widths = |head: &[String], side: fn(&Row) -> &[String]| -> Vec<usize> {
        (0..head.len())
            .map(|i| {
                rows.iter()
                    .map(|r| side(r)[i].len())
                    .chain([head[i].len()])
                    .max()
                    .unwrap_or(1)
            })
            .collect()
    };
    let w_in = widths(&head_in, |r| &r.0);
    let w_out = widths(&head_out, |r| &r.1);
    let mut out = format!("{} | {}\n", line(&head_in, &w_in), line(&head_out, &w_out));
    let rule = w_in.iter().sum::<usize>() + w_in.len() + 1 + w_out.iter().sum::<usize>() + w_out.len();
    out.push_str(&"-".repeat(rule));
    for (i, o) in &rows {
        out.push('\n');
        out.push_str(&format!("{} | {}", line(i, &w_in), line(o, &w_out)));
    }
    out
}

fn strings(v: &[usize]) -> Vec<String> {
    v.iter().map(|d| d.to_string()).collect()
}

pub fn render(a: &DeterministicAssignment) -> String {
    let s = a.scenario();
    let (hi, ho) = headers(s.n_parties());
    let rows = (0..s.n_joint_inputs())
        .map(|xi| (strings(&s.decode_inputs(xi)), strings(&a.outputs(xi))))
        .collect();
    grid(hi, ho, rows)
}

/// Tables selected by a time-order condition, merged into one table with a
/// `time order` column that reads `any` where they agree.
pub fn render_by_order(tables: &[(&str, &DeterministicAssignment)]) -> String {
    let s = tables[0].1.scenario();
    let (mut hi, ho) = headers(s.n_parties());
    hi.push("time order".into());
    let mut rows = Vec::new();
    for xi in 0..s.n_joint_inputs() {
        let x = strings(&s.decode_inputs(xi));
        let first = tables[0].1.outputs(xi);
        if tables.iter().all(|(_, t)| t.outputs(xi) == first) {
            rows.push(([x, vec!["any".into()]].concat(), strings(&first)));
        } else {
            for (label, t) in tables {
                rows.push(([x.clone(), vec![label.to_string()]].concat(), strings(&t.outputs(xi))));
            }
        }
    }
    grid(hi, ho, rows)
}
