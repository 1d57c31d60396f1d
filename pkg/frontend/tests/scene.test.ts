import { describe, expect, it } from "vitest";
import { parseMesh, parseTrace } from "../src/formats.js";
import {
  applyFrame,
  bedMatrix,
  buildScene,
  loadTraceIntoScene,
  tracePositions,
} from "../src/scene.js";
import { fixture } from "./helpers.js";

const planar = parseTrace(fixture("small_plate.trace"));
const crash = parseTrace(fixture("crash.trace"));
const mesh = parseMesh(fixture("flat_plate.mesh.txt"));

const IDENTITY4 = [
  1, 0, 0, 0,
  0, 1, 0, 0,
  0, 0, 1, 0,
  0, 0, 0, 1,
];

describe("bedMatrix", () => {
  it("maps an identity frame to the identity matrix", () => {
    const m = bedMatrix(planar.frames[0]);
    expect(Array.from(m.elements)).toEqual(IDENTITY4);
  });

  it("places the row-major rotation and translation correctly", () => {
    const frame = crash.frames[0];
    const m = bedMatrix(frame).elements; // column-major storage
    expect(m[0]).toBe(frame.rotation[0]);
    expect(m[1]).toBe(frame.rotation[3]);
    expect(m[2]).toBe(frame.rotation[6]);
    expect(m[4]).toBe(frame.rotation[1]);
    expect(m[12]).toBe(frame.translation[0]);
    expect(m[13]).toBe(frame.translation[1]);
    expect(m[14]).toBe(frame.translation[2]);
    expect(m[15]).toBe(1);
  });
});

describe("tracePositions", () => {
  it("flattens every frame's xyz in order", () => {
    const positions = tracePositions(planar);
    expect(positions.length).toBe(planar.frames.length * 3);
    expect(positions[0]).toBeCloseTo(planar.frames[0].x, 6);
    expect(positions[1]).toBeCloseTo(planar.frames[0].y, 6);
    expect(positions[2]).toBeCloseTo(planar.frames[0].z, 6);
    const last = planar.frames.length - 1;
    expect(positions[last * 3 + 2]).toBeCloseTo(planar.frames[last].z, 6);
  });
});

describe("buildScene", () => {
  it("includes the bed, path line, nozzle, and marker nodes", () => {
    const handles = buildScene(null, 80);
    expect(handles.scene.getObjectByName("bed")).toBe(handles.bedGroup);
    expect(handles.scene.getObjectByName("tip-path")).toBe(handles.pathLine);
    expect(handles.scene.getObjectByName("nozzle")).toBe(handles.nozzle);
    expect(handles.scene.getObjectByName("collision-markers")).toBe(handles.markers);
    expect(handles.bedGroup.getObjectByName("substrate")).toBeUndefined();
  });

  it("adds the substrate riding the bed group when a mesh is given", () => {
    const handles = buildScene(mesh, 80);
    const substrate = handles.bedGroup.getObjectByName("substrate");
    expect(substrate).toBeDefined();
    const geometry = (substrate as import("three").Mesh).geometry;
    expect(geometry.getAttribute("position").count).toBe(mesh.positions.length / 3);
  });
});

describe("loadTraceIntoScene / applyFrame", () => {
  it("draws the path prefix up to the scrub index", () => {
    const handles = buildScene(null, 80);
    loadTraceIntoScene(handles, planar);
    expect(handles.pathLine.geometry.getAttribute("position").count).toBe(planar.frames.length);
    applyFrame(handles, planar, 10);
    expect(handles.pathLine.geometry.drawRange.count).toBe(11);
    applyFrame(handles, planar, 0);
    expect(handles.pathLine.geometry.drawRange.count).toBe(1);
  });

  it("moves the nozzle to the frame position", () => {
    const handles = buildScene(null, 80);
    loadTraceIntoScene(handles, planar);
    const frame = planar.frames[7];
    applyFrame(handles, planar, 7);
    expect(handles.nozzle.position.x).toBeCloseTo(frame.x, 9);
    expect(handles.nozzle.position.y).toBeCloseTo(frame.y, 9);
    expect(handles.nozzle.position.z).toBeCloseTo(frame.z, 9);
  });

  it("poses the bed with the frame transform", () => {
    const handles = buildScene(null, 80);
    loadTraceIntoScene(handles, crash);
    applyFrame(handles, crash, 0);
    const m = handles.bedGroup.matrix.elements;
    expect(m[0]).toBe(crash.frames[0].rotation[0]);
    expect(m[2]).toBe(crash.frames[0].rotation[6]);
    applyFrame(handles, planar, 0);
    expect(Array.from(handles.bedGroup.matrix.elements)).toEqual(IDENTITY4);
  });

  it("creates one marker point per flagged frame", () => {
    const handles = buildScene(null, 80);
    loadTraceIntoScene(handles, crash);
    expect(handles.markers.geometry.getAttribute("position").count).toBe(2);
    loadTraceIntoScene(handles, planar);
    expect(handles.markers.geometry.getAttribute("position").count).toBe(0);
  });
});
