//! Unoptimized SLIC written step by step, for equivalence checks against the
//! production implementation. Shares only the public data types and the tie
//! rules: lowest center id, raster-first pixel, lowest label.

#![allow(dead_code)]

use std::collections::VecDeque;

use hybridseg_core::slic::ClusterCenter;
use hybridseg_core::LabImage;

pub struct ReferenceOutput {
    pub labels: Vec<u32>,
    pub initial_centers: usize,
    pub iterations: usize,
}

fn pixel(img: &LabImage, x: usize, y: usize) -> [f64; 3] {
    let i = (y * img.width() + x) * 3;
    [img.data()[i], img.data()[i + 1], img.data()[i + 2]]
}

fn grid(w: usize, h: usize, k: usize) -> (usize, usize) {
    let mut best = (false, f64::INFINITY, 0, 0);
    let mut first = true;
    for rows in 1..=h.min(k) {
        let ideal = k as f64 / rows as f64;
        for columns in [ideal.floor(), ideal.ceil()] {
            let columns = (columns as usize).clamp(1, w);
            let count = (columns * rows) as f64;
            let aspect = (w as f64 / columns as f64) / (h as f64 / rows as f64);
            let cost = (count / k as f64).ln().abs() + 0.5 * aspect.ln().abs();
            let ok = count >= 0.75 * k as f64 && count <= 1.3 * k as f64;
            if first || (ok && !best.0) || (ok == best.0 && cost < best.1) {
                best = (ok, cost, columns, rows);
                first = false;
            }
        }
    }
    (best.2, best.3)
}

fn gradient(img: &LabImage, x: usize, y: usize) -> f64 {
    let d = |p: [f64; 3], q: [f64; 3]| {
        let a = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
        a[0] * a[0] + a[1] * a[1] + a[2] * a[2]
    };
    d(pixel(img, x + 1, y), pixel(img, x - 1, y)) + d(pixel(img, x, y + 1), pixel(img, x, y - 1))
}

fn center_at(img: &LabImage, x: usize, y: usize) -> ClusterCenter {
    let [l, a, b] = pixel(img, x, y);
    ClusterCenter {
        l,
        a,
        b,
        x: x as f64,
        y: y as f64,
    }
}

fn distance(img: &LabImage, x: usize, y: usize, c: &ClusterCenter, weight: f64) -> f64 {
    let p = pixel(img, x, y);
    let dl = c.l - p[0];
    let da = c.a - p[1];
    let db = c.b - p[2];
    let dx = c.x - x as f64;
    let dy = c.y - y as f64;
    (dl * dl + da * da + db * db).sqrt() + weight * (dx * dx + dy * dy).sqrt()
}

pub fn reference_slic(
    img: &LabImage,
    k: usize,
    m: f64,
    max_iter: usize,
    residual_tol: f64,
    min_region_factor: f64,
) -> ReferenceOutput {
    let (w, h) = (img.width(), img.height());
    let n = w * h;
    let s = (n as f64 / k as f64).sqrt();

    // 1. seed on the grid
    let (cols, rows) = grid(w, h, k);
    let (sx, sy) = (w as f64 / cols as f64, h as f64 / rows as f64);
    let mut centers = Vec::new();
    for j in 0..rows {
        for i in 0..cols {
            let x = (sx * (i as f64 + 0.5)).floor() as usize;
            let y = (sy * (j as f64 + 0.5)).floor() as usize;
            centers.push(center_at(img, x, y));
        }
    }

    // 2. perturb to the lowest gradient in 3x3
    if sx >= 3.0 && sy >= 3.0 {
        for c in centers.iter_mut() {
            let (cx, cy) = (c.x as i64, c.y as i64);
            let interior =
                |x: i64, y: i64| x >= 1 && y >= 1 && x <= w as i64 - 2 && y <= h as i64 - 2;
            let mut best: Option<(f64, i64, i64)> = None;
            if interior(cx, cy) {
                best = Some((gradient(img, cx as usize, cy as usize), cx, cy));
            }
            for y in cy - 1..=cy + 1 {
                for x in cx - 1..=cx + 1 {
                    if interior(x, y) {
                        let g = gradient(img, x as usize, y as usize);
                        if best.is_none() || g < best.unwrap().0 {
                            best = Some((g, x, y));
                        }
                    }
                }
            }
            if let Some((_, x, y)) = best {
                *c = center_at(img, x as usize, y as usize);
            }
        }
    }
    let initial_centers = centers.len();

    // 3-6. assign, update, repeat
    let weight = m / s;
    let mut labels = vec![0u32; n];
    let mut iterations = 0;
    for _ in 0..max_iter {
        for y in 0..h {
            for x in 0..w {
                let mut best: Option<(f64, u32)> = None;
                for (id, c) in centers.iter().enumerate() {
                    let x_lo = (c.x - s).ceil().max(0.0);
                    let x_hi = (c.x + s).floor().min(w as f64 - 1.0);
                    let y_lo = (c.y - s).ceil().max(0.0);
                    let y_hi = (c.y + s).floor().min(h as f64 - 1.0);
                    let covered = x as f64 >= x_lo
                        && x as f64 <= x_hi
                        && y as f64 >= y_lo
                        && y as f64 <= y_hi;
                    if !covered {
                        continue;
                    }
                    let d = distance(img, x, y, c, weight);
                    if best.is_none() || d < best.unwrap().0 {
                        best = Some((d, id as u32));
                    }
                }
                if best.is_none() {
                    for (id, c) in centers.iter().enumerate() {
                        let d = distance(img, x, y, c, weight);
                        if best.is_none() || d < best.unwrap().0 {
                            best = Some((d, id as u32));
                        }
                    }
                }
                labels[y * w + x] = best.unwrap().1;
            }
        }

        let mut residual = 0.0;
        for (id, c) in centers.iter_mut().enumerate() {
            let mut sum = [0.0; 5];
            let mut count = 0usize;
            for y in 0..h {
                for x in 0..w {
                    if labels[y * w + x] == id as u32 {
                        let p = pixel(img, x, y);
                        sum[0] += p[0];
                        sum[1] += p[1];
                        sum[2] += p[2];
                        sum[3] += x as f64;
                        sum[4] += y as f64;
                        count += 1;
                    }
                }
            }
            if count == 0 {
                continue;
            }
            let k = count as f64;
            let next = ClusterCenter {
                l: sum[0] / k,
                a: sum[1] / k,
                b: sum[2] / k,
                x: sum[3] / k,
                y: sum[4] / k,
            };
            residual += (next.l - c.l).abs()
                + (next.a - c.a).abs()
                + (next.b - c.b).abs()
                + (next.x - c.x).abs()
                + (next.y - c.y).abs();
            *c = next;
        }
        iterations += 1;
        if residual < residual_tol {
            break;
        }
    }

    // 7. connectivity
    let labels = reference_connectivity(w, h, &labels, s, min_region_factor);
    ReferenceOutput {
        labels: dense(&labels),
        initial_centers,
        iterations,
    }
}

fn neighbors(w: usize, h: usize, i: usize) -> Vec<usize> {
    let (x, y) = (i % w, i / w);
    let mut out = Vec::new();
    if y > 0 {
        out.push(i - w);
    }
    if x > 0 {
        out.push(i - 1);
    }
    if x + 1 < w {
        out.push(i + 1);
    }
    if y + 1 < h {
        out.push(i + w);
    }
    out
}

pub fn reference_connectivity(w: usize, h: usize, labels: &[u32], s: f64, factor: f64) -> Vec<u32> {
    let n = w * h;
    let mut region = vec![usize::MAX; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if region[start] != usize::MAX {
            continue;
        }
        let id = members.len();
        let mut queue = VecDeque::from([start]);
        region[start] = id;
        let mut px = Vec::new();
        while let Some(p) = queue.pop_front() {
            px.push(p);
            for q in neighbors(w, h, p) {
                if region[q] == usize::MAX && labels[q] == labels[p] {
                    region[q] = id;
                    queue.push_back(q);
                }
            }
        }
        members.push(px);
    }
    let r_count = members.len();
    let label_of = |r: usize| labels[members[r].iter().copied().min().unwrap()];
    let threshold = factor * s * s;

    let mut resolved: Vec<Option<u32>> = vec![None; r_count];
    for r in 0..r_count {
        let l = label_of(r);
        let largest = (0..r_count)
            .filter(|&q| label_of(q) == l)
            .fold(None::<usize>, |acc, q| match acc {
                Some(a) if members[a].len() >= members[q].len() => Some(a),
                _ => Some(q),
            })
            .unwrap();
        if largest == r && members[r].len() as f64 >= threshold {
            resolved[r] = Some(l);
        }
    }
    if resolved.iter().all(Option::is_none) {
        let mut big = 0;
        for r in 0..r_count {
            if members[r].len() > members[big].len() {
                big = r;
            }
        }
        resolved[big] = Some(label_of(big));
    }

    loop {
        let pending: Vec<usize> = (0..r_count).filter(|&r| resolved[r].is_none()).collect();
        if pending.is_empty() {
            break;
        }
        for r in pending {
            // edges from this region to each resolved label
            let mut edges: Vec<(u32, usize)> = Vec::new();
            for &p in &members[r] {
                for q in neighbors(w, h, p) {
                    if region[q] == r {
                        continue;
                    }
                    if let Some(l) = resolved[region[q]] {
                        match edges.iter_mut().find(|(el, _)| *el == l) {
                            Some(e) => e.1 += 1,
                            None => edges.push((l, 1)),
                        }
                    }
                }
            }
            edges.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            if let Some(&(l, _)) = edges.first() {
                resolved[r] = Some(l);
            }
        }
    }
    (0..n).map(|i| resolved[region[i]].unwrap()).collect()
}

pub fn dense(labels: &[u32]) -> Vec<u32> {
    let mut order: Vec<u32> = Vec::new();
    labels
        .iter()
        .map(|l| match order.iter().position(|o| o == l) {
            Some(i) => i as u32,
            None => {
                order.push(*l);
                order.len() as u32 - 1
            }
        })
        .collect()
}
