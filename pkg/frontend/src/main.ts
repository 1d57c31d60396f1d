/**
 * Browser bootstrap: mounts the app, then drives a WebGL render loop over
 * whatever scene the app currently holds. Everything interactive lives in
 * app.ts; this file only owns the renderer and camera, which the scripted
 * tests never need.
 */

import * as THREE from "three";
import { createApp } from "./app.js";

const root = document.getElementById("app");
if (root === null) throw new Error("missing #app mount point");

const app = createApp(root);

const host = app.els.canvasHost;
const renderer = new THREE.WebGLRenderer({ antialias: true });
renderer.setPixelRatio(window.devicePixelRatio);
host.appendChild(renderer.domElement);

const camera = new THREE.PerspectiveCamera(45, 1, 0.1, 2000);
camera.up.set(0, 0, 1);
camera.position.set(160, -160, 120);
camera.lookAt(0, 0, 20);

function resize(): void {
  const width = host.clientWidth || 800;
  const height = Math.max(host.clientHeight, 420);
  renderer.setSize(width, height);
  camera.aspect = width / height;
  camera.updateProjectionMatrix();
}
window.addEventListener("resize", resize);
resize();

let orbit = 0;
let dragging = false;
let lastX = 0;
renderer.domElement.addEventListener("pointerdown", (event) => {
  dragging = true;
  lastX = event.clientX;
});
window.addEventListener("pointerup", () => {
  dragging = false;
});
window.addEventListener("pointermove", (event) => {
  if (!dragging) return;
  orbit += (event.clientX - lastX) * 0.01;
  lastX = event.clientX;
});

function frame(): void {
  requestAnimationFrame(frame);
  const radius = 230;
  camera.position.set(
    radius * Math.cos(orbit - Math.PI / 4),
    radius * Math.sin(orbit - Math.PI / 4),
    130,
  );
  camera.lookAt(0, 0, 20);
  const scene = app.scene();
  if (scene !== null) renderer.render(scene.scene, camera);
}
frame();

void app.actions.connect();
