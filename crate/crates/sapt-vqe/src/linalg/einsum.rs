use crate::error::{Error, Result};
use ndarray::{Array3, ArrayD, Axis, IxDyn};
use std::collections::HashMap;

struct Term {
    idx: Vec<char>,
    t: ArrayD<f64>,
}

fn parse(spec: &str) -> Result<(Vec<Vec<char>>, Vec<char>)> {
    let spec: String = spec.chars().filter(|c| !c.is_whitespace()).collect();
    let (lhs, rhs) = spec
        .split_once("->")
        .ok_or_else(|| Error::ShapeMismatch(format!("einsum spec `{spec}` lacks `->`")))?;
    let inputs: Vec<Vec<char>> = lhs.split(',').map(|s| s.chars().collect()).collect();
    let output: Vec<char> = rhs.chars().collect();
    for (k, inp) in inputs.iter().enumerate() {
        for (i, c) in inp.iter().enumerate() {
            if inp[..i].contains(c) {
                return Err(Error::ShapeMismatch(format!("index `{c}` repeated in operand {k}")));
            }
        }
    }
    for (i, c) in output.iter().enumerate() {
        if output[..i].contains(c) || !inputs.iter().any(|inp| inp.contains(c)) {
            return Err(Error::ShapeMismatch(format!("bad output index `{c}`")));
        }
    }
    Ok((inputs, output))
}

fn permute(term: &Term, order: &[char]) -> ArrayD<f64> {
    let perm: Vec<usize> = order.iter().map(|c| term.idx.iter().position(|x| x == c).unwrap()).collect();
    if perm.iter().enumerate().all(|(i, &p)| i == p) && term.t.is_standard_layout() {
        return term.t.clone();
    }
    term.t.view().permuted_axes(IxDyn(&perm)).as_standard_layout().into_owned()
}

fn sum_out(term: Term, keep: &dyn Fn(char) -> bool) -> Term {
    let mut t = term.t;
    let mut idx = term.idx;
    let mut ax = idx.len();
    while ax > 0 {
        ax -= 1;
        if !keep(idx[ax]) {
            t = t.sum_axis(Axis(ax));
            idx.remove(ax);
        }
    }
    Term { idx, t }
}

fn pair(x: &Term, y: &Term, keep: &dyn Fn(char) -> bool, dims: &HashMap<char, usize>) -> Term {
    let batch: Vec<char> = x.idx.iter().copied().filter(|c| y.idx.contains(c) && keep(*c)).collect();
    let con: Vec<char> = x.idx.iter().copied().filter(|c| y.idx.contains(c) && !keep(*c)).collect();
    let fx: Vec<char> = x.idx.iter().copied().filter(|c| !y.idx.contains(c)).collect();
    let fy: Vec<char> = y.idx.iter().copied().filter(|c| !x.idx.contains(c)).collect();
    let size = |v: &[char]| v.iter().map(|c| dims[c]).product::<usize>();
    let (nb, nc, nx, ny) = (size(&batch), size(&con), size(&fx), size(&fy));

    let xo: Vec<char> = batch.iter().chain(fx.iter()).chain(con.iter()).copied().collect();
    let yo: Vec<char> = batch.iter().chain(con.iter()).chain(fy.iter()).copied().collect();
    let xp = permute(x, &xo).into_shape_with_order((nb, nx, nc)).unwrap();
    let yp = permute(y, &yo).into_shape_with_order((nb, nc, ny)).unwrap();
    let mut out = Array3::<f64>::zeros((nb, nx, ny));
    for b in 0..nb {
        let m = xp.index_axis(Axis(0), b).dot(&yp.index_axis(Axis(0), b));
        out.index_axis_mut(Axis(0), b).assign(&m);
    }
    let idx: Vec<char> = batch.iter().chain(fx.iter()).chain(fy.iter()).copied().collect();
    let shape: Vec<usize> = idx.iter().map(|c| dims[c]).collect();
    Term { idx, t: out.into_shape_with_order(IxDyn(&shape)).unwrap() }
}

fn merged(sets: &[Vec<char>], i: usize, j: usize, output: &[char]) -> Vec<char> {
    let rest: Vec<char> = sets
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != i && *k != j)
        .flat_map(|(_, t)| t.iter().copied())
        .collect();
    let mut res: Vec<char> = Vec::new();
    for c in sets[i].iter().chain(sets[j].iter()) {
        if (output.contains(c) || rest.contains(c)) && !res.contains(c) {
            res.push(*c);
        }
    }
    res
}

fn greedy(sets: &[Vec<char>], output: &[char], dims: &HashMap<char, usize>) -> (usize, usize) {
    let mut best: Option<(usize, usize, usize)> = None;
    for i in 0..sets.len() {
        for j in (i + 1)..sets.len() {
            let size: usize = merged(sets, i, j, output).iter().map(|c| dims[c]).product();
            if best.map_or(true, |(_, _, b)| size < b) {
                best = Some((i, j, size));
            }
        }
    }
    let (i, j, _) = best.unwrap();
    (i, j)
}

/// Exhaustive search over pairwise orders minimizing total multiply-adds.
fn plan(sets: &[Vec<char>], output: &[char], dims: &HashMap<char, usize>) -> (f64, (usize, usize)) {
    if sets.len() < 2 {
        return (0.0, (0, 0));
    }
    let mut best = (f64::INFINITY, (0, 1));
    for i in 0..sets.len() {
        for j in (i + 1)..sets.len() {
            let mut all: Vec<char> = sets[i].clone();
            all.extend(sets[j].iter().filter(|c| !sets[i].contains(c)));
            let flops: f64 = all.iter().map(|c| dims[c] as f64).product();
            let m = merged(sets, i, j, output);
            let mut next: Vec<Vec<char>> = sets
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != i && *k != j)
                .map(|(_, t)| t.clone())
                .collect();
            next.push(m);
            let total = flops + plan(&next, output, dims).0;
            if total < best.0 {
                best = (total, (i, j));
            }
        }
    }
    best
}

/// Einsum-style contraction, e.g. `contract("pqrs,rs->pq", &[&g, &d])`.
///
/// Operands are combined pairwise, each step a batched matrix product. Up to six
/// operands the order minimizing total work is searched exhaustively; beyond that
/// the pair with the smallest intermediate goes first.
pub fn contract(spec: &str, tensors: &[&ArrayD<f64>]) -> Result<ArrayD<f64>> {
    let (inputs, output) = parse(spec)?;
    if inputs.len() != tensors.len() {
        return Err(Error::ShapeMismatch(format!(
            "spec has {} operands, got {}",
            inputs.len(),
            tensors.len()
        )));
    }
    let mut dims: HashMap<char, usize> = HashMap::new();
    for (inp, t) in inputs.iter().zip(tensors) {
        if inp.len() != t.ndim() {
            return Err(Error::ShapeMismatch(format!(
                "operand `{}` has rank {}",
                inp.iter().collect::<String>(),
                t.ndim()
            )));
        }
        for (c, &d) in inp.iter().zip(t.shape()) {
            if let Some(&old) = dims.get(c) {
                if old != d {
                    return Err(Error::ShapeMismatch(format!("index `{c}` has extents {old} and {d}")));
                }
            } else {
                dims.insert(*c, d);
            }
        }
    }

    let mut terms: Vec<Term> = inputs
        .into_iter()
        .zip(tensors)
        .map(|(idx, t)| Term { idx, t: (*t).clone() })
        .collect();

    loop {
        // drop indices that neither the output nor any other operand still needs
        for k in 0..terms.len() {
            let others: Vec<char> = terms
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .flat_map(|(_, t)| t.idx.iter().copied())
                .collect();
            let t = std::mem::replace(&mut terms[k], Term { idx: vec![], t: ArrayD::zeros(IxDyn(&[])) });
            terms[k] = sum_out(t, &|c| output.contains(&c) || others.contains(&c));
        }
        if terms.len() == 1 {
            break;
        }
        let sets: Vec<Vec<char>> = terms.iter().map(|t| t.idx.clone()).collect();
        let (i, j) = if sets.len() <= 6 { plan(&sets, &output, &dims).1 } else { greedy(&sets, &output, &dims) };
        let y = terms.remove(j);
        let x = terms.remove(i);
        let rest: Vec<char> = terms.iter().flat_map(|t| t.idx.iter().copied()).collect();
        let merged = pair(&x, &y, &|c| output.contains(&c) || rest.contains(&c), &dims);
        terms.push(merged);
    }
    let last = terms.pop().unwrap();
    Ok(permute(&last, &output))
}
