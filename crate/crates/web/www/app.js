import init, { ArmDemo, DiffeoDemo } from "./pkg/tree_motion_web.js";

const $ = (id) => document.getElementById(id);
const showError = (e) => { $("error").textContent = e ? String(e.message ?? e) : ""; };

function view(canvas, extent) {
  const s = Math.min(canvas.width, canvas.height) / (2 * extent);
  return {
    x: (u) => canvas.width / 2 + u * s,
    y: (v) => canvas.height / 2 - v * s,
    back: (px, py) => [(px - canvas.width / 2) / s, (canvas.height / 2 - py) / s],
    scale: s,
  };
}

function arrow(ctx, v, x, y, dx, dy, color) {
  const len = Math.hypot(dx, dy);
  if (len < 1e-9) return;
  const x1 = v.x(x + dx), y1 = v.y(y + dy);
  ctx.strokeStyle = ctx.fillStyle = color;
  ctx.lineWidth = 2;
  ctx.beginPath(); ctx.moveTo(v.x(x), v.y(y)); ctx.lineTo(x1, y1); ctx.stroke();
  const a = Math.atan2(y1 - v.y(y), x1 - v.x(x));
  ctx.beginPath();
  ctx.moveTo(x1, y1);
  ctx.lineTo(x1 - 8 * Math.cos(a - 0.4), y1 - 8 * Math.sin(a - 0.4));
  ctx.lineTo(x1 - 8 * Math.cos(a + 0.4), y1 - 8 * Math.sin(a + 0.4));
  ctx.fill();
}

function armApp() {
  const canvas = $("arm"), ctx = canvas.getContext("2d");
  const v = view(canvas, 2.8);
  let arm = new ArmDemo();
  let running = true;
  let trace = [];
  let phi = [];

  const reset = () => {
    try {
      arm.set_configuration(new Float64Array([-1.2, 0.8, 1.5]));
      trace = []; phi = [];
      showError(null);
    } catch (e) { showError(e); }
  };

  canvas.addEventListener("click", (ev) => {
    const r = canvas.getBoundingClientRect();
    const [x, y] = v.back(ev.clientX - r.left, ev.clientY - r.top);
    try {
      if (ev.shiftKey) arm.set_obstacle(x, y, Number($("radius").value));
      else arm.set_goal(x, y);
      phi = [];
      showError(null);
    } catch (e) { showError(e); }
  });
  $("radius").addEventListener("input", () => {
    const [x, y] = arm.obstacle();
    try { arm.set_obstacle(x, y, Number($("radius").value)); showError(null); } catch (e) { showError(e); }
  });
  $("play").addEventListener("click", () => {
    running = !running;
    $("play").textContent = running ? "Pause" : "Play";
  });
  $("reset").addEventListener("click", reset);

  function draw() {
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    const [ox, oy, rad] = arm.obstacle();
    ctx.fillStyle = "#f4d4d4";
    ctx.beginPath(); ctx.arc(v.x(ox), v.y(oy), (rad + arm.barrier_margin()) * v.scale, 0, 2 * Math.PI); ctx.fill();
    ctx.fillStyle = "#c44";
    ctx.beginPath(); ctx.arc(v.x(ox), v.y(oy), rad * v.scale, 0, 2 * Math.PI); ctx.fill();

    const [gx, gy] = arm.goal();
    ctx.strokeStyle = "#1f77b4"; ctx.lineWidth = 2;
    ctx.beginPath(); ctx.arc(v.x(gx), v.y(gy), 7, 0, 2 * Math.PI); ctx.stroke();

    ctx.strokeStyle = "#aaa"; ctx.lineWidth = 1;
    ctx.beginPath();
    trace.forEach(([x, y], i) => (i ? ctx.lineTo(v.x(x), v.y(y)) : ctx.moveTo(v.x(x), v.y(y))));
    ctx.stroke();

    const p = arm.joint_positions();
    ctx.strokeStyle = "#333"; ctx.lineWidth = 6; ctx.lineCap = "round";
    ctx.beginPath(); ctx.moveTo(v.x(p[0]), v.y(p[1]));
    for (let i = 2; i < p.length; i += 2) ctx.lineTo(v.x(p[i]), v.y(p[i + 1]));
    ctx.stroke();
    ctx.fillStyle = "#333";
    for (let i = 0; i < p.length; i += 2) { ctx.beginPath(); ctx.arc(v.x(p[i]), v.y(p[i + 1]), 4, 0, 2 * Math.PI); ctx.fill(); }

    const ex = p[p.length - 2], ey = p[p.length - 1];
    try {
      const w = arm.ee_velocities();
      const k = 0.5;
      arrow(ctx, v, ex, ey, k * w[0], k * w[1], "#1f77b4");
      arrow(ctx, v, ex, ey, k * w[2], k * w[3], "#d62728");
      arrow(ctx, v, ex, ey, k * w[4], k * w[5], "#2ca02c");
    } catch (e) { showError(e); }

    const q = arm.configuration().map((x) => x.toFixed(3)).join(", ");
    $("arm-readout").textContent =
      `t      ${arm.time().toFixed(2)}\nq      [${q}]\nPhi    ${arm.potential().toExponential(3)}\n|grad| ${arm.grad_norm().toExponential(3)}`;
    drawPhi();
  }

  function drawPhi() {
    const c = $("phi"), g = c.getContext("2d");
    g.clearRect(0, 0, c.width, c.height);
    if (phi.length < 2) return;
    const hi = Math.max(...phi), lo = Math.min(...phi);
    g.strokeStyle = "#555"; g.beginPath();
    phi.forEach((f, i) => {
      const x = (i / (phi.length - 1)) * c.width;
      const y = c.height - 4 - ((f - lo) / Math.max(hi - lo, 1e-12)) * (c.height - 8);
      i ? g.lineTo(x, y) : g.moveTo(x, y);
    });
    g.stroke();
    g.fillStyle = "#555"; g.fillText("Phi along the rollout", 4, 12);
  }

  function frame() {
    if (running) {
      try {
        arm.step(Number($("speed").value), 1e-3);
        const p = arm.joint_positions();
        trace.push([p[p.length - 2], p[p.length - 1]]);
        if (trace.length > 600) trace.shift();
        phi.push(arm.potential());
        if (phi.length > 400) phi.shift();
      } catch (e) { showError(e); running = false; $("play").textContent = "Play"; }
    }
    draw();
    requestAnimationFrame(frame);
  }
  frame();
}

function gridApp() {
  const canvas = $("grid"), ctx = canvas.getContext("2d");
  const v = view(canvas, 3.2);
  const lines = 17, samples = 80, extent = 2;
  let demo;
  let hover = null;

  const rebuild = () => {
    demo?.free();
    demo = new DiffeoDemo(Number($("seed").value), Number($("layers").value), 32, Number($("std").value));
    draw();
  };

  function draw() {
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    const pts = demo.warp_grid(lines, samples, extent);
    for (let l = 0; l < 2 * lines; l++) {
      ctx.strokeStyle = l < lines ? "#1f77b4" : "#ff7f0e";
      ctx.lineWidth = 1;
      ctx.beginPath();
      for (let j = 0; j < samples; j++) {
        const k = 2 * (l * samples + j);
        j ? ctx.lineTo(v.x(pts[k]), v.y(pts[k + 1])) : ctx.moveTo(v.x(pts[k]), v.y(pts[k + 1]));
      }
      ctx.stroke();
    }
    let text = `round-trip error ${demo.roundtrip_error(21, extent).toExponential(2)}`;
    if (hover) {
      const [x, y] = demo.inverse(hover[0], hover[1]);
      const [fx, fy] = demo.forward(x, y);
      ctx.fillStyle = "#000";
      ctx.beginPath(); ctx.arc(v.x(hover[0]), v.y(hover[1]), 4, 0, 2 * Math.PI); ctx.fill();
      text += `\ny        (${hover[0].toFixed(3)}, ${hover[1].toFixed(3)})` +
        `\nphi^-1 y (${x.toFixed(3)}, ${y.toFixed(3)})` +
        `\nlog det  ${demo.log_det(x, y).toFixed(4)}` +
        `\nrecheck  ${Math.hypot(fx - hover[0], fy - hover[1]).toExponential(2)}`;
    }
    $("grid-readout").textContent = text;
  }

  for (const id of ["seed", "layers", "std"]) $(id).addEventListener("input", rebuild);
  canvas.addEventListener("mousemove", (ev) => {
    const r = canvas.getBoundingClientRect();
    hover = v.back(ev.clientX - r.left, ev.clientY - r.top);
    draw();
  });
  canvas.addEventListener("mouseleave", () => { hover = null; draw(); });
  rebuild();
}

init().then(() => {
  try { armApp(); gridApp(); } catch (e) { showError(e); }
});
