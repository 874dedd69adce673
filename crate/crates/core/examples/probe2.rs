use unshuffle_core::instance::FloatInstance;
use unshuffle_core::mat::Mat;

fn lstsq(a: &Mat<f64>, b: &[f64]) -> Vec<f64> {
    let n = a.ncols();
    let mut ata = vec![vec![0.0; n]; n];
    let mut atb = vec![0.0; n];
    for i in 0..a.nrows() {
        let r = a.row(i);
        for p in 0..n { atb[p] += r[p] * b[i]; for q in p..n { ata[p][q] += r[p] * r[q]; } }
    }
    for p in 0..n { for q in 0..p { ata[p][q] = ata[q][p]; } }
    let mut m = ata; let mut rhs = atb;
    for k in 0..n {
        let piv = (k..n).max_by(|&i,&j| m[i][k].abs().partial_cmp(&m[j][k].abs()).unwrap()).unwrap();
        m.swap(k, piv); rhs.swap(k, piv);
        for i in k+1..n { let f = m[i][k] / m[k][k]; for j in k..n { m[i][j] -= f * m[k][j]; } rhs[i] -= f * rhs[k]; }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() { let mut acc = rhs[i]; for j in i+1..n { acc -= m[i][j] * x[j]; } x[i] = acc / m[i][i]; }
    x
}

fn main() {
    let inst = FloatInstance::generate(4, 2, 11, 0.0).unwrap();
    let truth = inst.xi_star.clone().unwrap();
    println!("truth {truth:?}");
    println!("y     {:?}", inst.y);
    println!("A     {:?}", inst.a.data());
    // verify lstsq itself: solve A x = correctly-aligned y
    let pi = inst.pi.clone().unwrap();
    let aligned = pi.inverse().inverse().apply(&inst.y); // identity sanity
    println!("aligned (pi applied to y should be A xi): {:?}", pi.apply(&inst.y));
    // wait: generation: y = pi.apply(A xi). so A xi = pi^{-1}... check both
    println!("pi image {:?}", pi.image());
    let w = inst.a.mul_vec(&truth);
    println!("A xi  {w:?}");
    let x1 = lstsq(&inst.a, &pi.inverse().apply(&inst.y));
    let x2 = lstsq(&inst.a, &aligned);
    println!("lstsq with pi^-1(y): {x1:?}");
    println!("lstsq with pi(y):    {x2:?}");

    // plain alternating from truth should stay put; from small perturbation should converge
    let mut sy = inst.y.clone();
    sy.sort_by(|p, q| p.partial_cmp(q).unwrap());
    for start in [truth.clone(), vec![truth[0] + 0.1, truth[1] - 0.1], vec![1.0, 1.0]] {
        let mut x = start.clone();
        for _ in 0..20 {
            let v = inst.a.mul_vec(&x);
            let mut iv: Vec<usize> = (0..4).collect();
            iv.sort_by(|&i, &j| v[i].partial_cmp(&v[j]).unwrap());
            let mut aligned = vec![0.0; 4];
            for (k, &i) in iv.iter().enumerate() { aligned[i] = sy[k]; }
            x = lstsq(&inst.a, &aligned);
        }
        let rel: f64 = x.iter().zip(&truth).map(|(a,b)| (a-b)*(a-b)).sum::<f64>().sqrt();
        println!("alternating from {start:?} -> {x:?} err {rel:.2e}");
    }
}
