/**
 * Three.js scene graph for the trace viewer. The machine frame is Z-up:
 * the nozzle tip trajectory comes straight from the trace's x/y/z words,
 * and the bed disc plus substrate ride the per-frame rigid transform the
 * trace records. No kinematics are computed here; the scene only poses
 * what the service already solved.
 */

import * as THREE from "three";
import type { MeshData, Trace, TraceFrame } from "./formats.js";

export interface SceneHandles {
  scene: THREE.Scene;
  /** Bed disc and substrate; its matrix tracks the scrubbed frame. */
  bedGroup: THREE.Group;
  pathLine: THREE.Line;
  nozzle: THREE.Group;
  markers: THREE.Points;
}

/** Row-major 3x3 + translation to a column-major three.js Matrix4. */
export function bedMatrix(frame: TraceFrame): THREE.Matrix4 {
  const r = frame.rotation;
  const t = frame.translation;
  return new THREE.Matrix4().set(
    r[0], r[1], r[2], t[0],
    r[3], r[4], r[5], t[1],
    r[6], r[7], r[8], t[2],
    0, 0, 0, 1,
  );
}

function substrateMesh(mesh: MeshData): THREE.Mesh {
  const geometry = new THREE.BufferGeometry();
  geometry.setAttribute("position", new THREE.BufferAttribute(mesh.positions, 3));
  geometry.setAttribute("normal", new THREE.BufferAttribute(mesh.normals, 3));
  geometry.setIndex(new THREE.BufferAttribute(mesh.indices, 1));
  const material = new THREE.MeshStandardMaterial({
    color: 0x4a7fb5,
    side: THREE.DoubleSide,
    flatShading: false,
  });
  return new THREE.Mesh(geometry, material);
}

function nozzleGlyph(): THREE.Group {
  const group = new THREE.Group();
  const cone = new THREE.Mesh(
    new THREE.ConeGeometry(2.0, 6.0, 24),
    new THREE.MeshStandardMaterial({ color: 0xd95f02 }),
  );
  // ConeGeometry points +Y; the nozzle hangs tip-down along -Z with the
  // tip at the group origin so group.position is the tip position.
  cone.rotation.x = Math.PI / 2;
  cone.position.z = 3.0;
  group.add(cone);
  return group;
}

export function buildScene(mesh: MeshData | null, bedRadius: number): SceneHandles {
  const scene = new THREE.Scene();
  scene.background = new THREE.Color(0x15181d);

  scene.add(new THREE.AmbientLight(0xffffff, 0.45));
  const sun = new THREE.DirectionalLight(0xffffff, 1.1);
  sun.position.set(60, 40, 120);
  scene.add(sun);

  const bedGroup = new THREE.Group();
  bedGroup.name = "bed";
  bedGroup.matrixAutoUpdate = false;
  const disc = new THREE.Mesh(
    new THREE.CircleGeometry(bedRadius, 64),
    new THREE.MeshStandardMaterial({
      color: 0x2d333d,
      side: THREE.DoubleSide,
      transparent: true,
      opacity: 0.85,
    }),
  );
  disc.name = "bed-disc";
  bedGroup.add(disc);
  const rim = new THREE.LineLoop(
    new THREE.BufferGeometry().setFromPoints(
      Array.from({ length: 65 }, (_, i) => {
        const a = (i / 64) * Math.PI * 2;
        return new THREE.Vector3(bedRadius * Math.cos(a), bedRadius * Math.sin(a), 0.01);
      }),
    ),
    new THREE.LineBasicMaterial({ color: 0x5c6673 }),
  );
  bedGroup.add(rim);
  if (mesh !== null) {
    const substrate = substrateMesh(mesh);
    substrate.name = "substrate";
    bedGroup.add(substrate);
  }
  scene.add(bedGroup);

  const pathLine = new THREE.Line(
    new THREE.BufferGeometry(),
    new THREE.LineBasicMaterial({ color: 0x7fd34e }),
  );
  pathLine.name = "tip-path";
  pathLine.frustumCulled = false;
  scene.add(pathLine);

  const nozzle = nozzleGlyph();
  nozzle.name = "nozzle";
  scene.add(nozzle);

  const markers = new THREE.Points(
    new THREE.BufferGeometry(),
    new THREE.PointsMaterial({ color: 0xe04040, size: 3.0, sizeAttenuation: false }),
  );
  markers.name = "collision-markers";
  markers.frustumCulled = false;
  scene.add(markers);

  return { scene, bedGroup, pathLine, nozzle, markers };
}

/** Machine-space tip positions for every frame, flattened xyz. */
export function tracePositions(trace: Trace): Float32Array {
  const out = new Float32Array(trace.frames.length * 3);
  trace.frames.forEach((frame, i) => {
    out[i * 3] = frame.x;
    out[i * 3 + 1] = frame.y;
    out[i * 3 + 2] = frame.z;
  });
  return out;
}

/** Install a new trace: full tip polyline plus one red point per flagged frame. */
export function loadTraceIntoScene(handles: SceneHandles, trace: Trace): void {
  const positions = tracePositions(trace);
  handles.pathLine.geometry.dispose();
  handles.pathLine.geometry = new THREE.BufferGeometry();
  handles.pathLine.geometry.setAttribute("position", new THREE.BufferAttribute(positions, 3));

  const flagged = trace.frames.filter((f) => f.flags.length > 0);
  const markerPositions = new Float32Array(flagged.length * 3);
  flagged.forEach((frame, i) => {
    markerPositions[i * 3] = frame.x;
    markerPositions[i * 3 + 1] = frame.y;
    markerPositions[i * 3 + 2] = frame.z;
  });
  handles.markers.geometry.dispose();
  handles.markers.geometry = new THREE.BufferGeometry();
  handles.markers.geometry.setAttribute(
    "position",
    new THREE.BufferAttribute(markerPositions, 3),
  );
}

/** Pose the scene at one frame: bed transform, path prefix, nozzle position. */
export function applyFrame(handles: SceneHandles, trace: Trace, index: number): void {
  const frame = trace.frames[index];
  if (frame === undefined) return;
  handles.bedGroup.matrix.copy(bedMatrix(frame));
  handles.bedGroup.matrixWorldNeedsUpdate = true;
  handles.pathLine.geometry.setDrawRange(0, index + 1);
  handles.nozzle.position.set(frame.x, frame.y, frame.z);
}
